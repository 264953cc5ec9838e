#pragma once

#include <functional>
#include <span>
#include <vector>

#include "spinn/autodiff/jet.hpp"
#include "spinn/autodiff/tape.hpp"
#include "spinn/error.hpp"

namespace spinn::autodiff {

/// A predictor evaluated on coordinate jets. Arithmetic on constant Vars is
/// checked, so a non-finite intermediate raises NumericError naming the op.
using JetPredictor = std::function<Jet<Var>(std::span<const Jet<Var>>)>;

inline DerivativeBundle eval_with_input_derivatives(const JetPredictor& predictor,
                                                    std::size_t input_dim,
                                                    std::span<const double> point) {
  if (point.size() != input_dim) {
    throw ConfigError("point has dimension " + std::to_string(point.size()) + ", model expects " +
                      std::to_string(input_dim));
  }
  if (input_dim == 0 || input_dim > kMaxDim) throw ConfigError("input dimension must be 1 or 2");
  std::vector<Jet<Var>> x;
  x.reserve(input_dim);
  for (std::size_t d = 0; d < input_dim; ++d) x.push_back(Jet<Var>::coordinate(Var(point[d]), d));
  return to_bundle(predictor(x), input_dim);
}

}  // namespace spinn::autodiff
