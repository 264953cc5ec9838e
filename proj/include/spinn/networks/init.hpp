#pragma once

#include <cstdint>
#include <span>

#include "spinn/networks/config.hpp"
#include "spinn/networks/params.hpp"
#include "spinn/random.hpp"

namespace spinn::networks {

/// MLP: Glorot-uniform weights, zero biases. KAN: theta uniform in [-s, s]
/// with s = 1 / (d_in * (degree + 1)) per layer.
NetworkParams init_params(const BackboneConfig& cfg, std::uint64_t seed);

/// Fills `values` (laid out as tensor_table(cfg)) from `rng`.
void init_values(const BackboneConfig& cfg, Rng& rng, std::span<double> values);

}  // namespace spinn::networks
