#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace spinn::networks {

enum class Activation { kTanh, kSigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths{100, 100};
  std::size_t output_dim = 1;
  Activation activation = Activation::kTanh;

  void validate() const;
};

/// Stack of Chebyshev layers: input -> hidden (x layer_count-1) -> output.
/// Every layer normalizes its input with tanh before the basis expansion.
struct KanConfig {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t degree = 5;
  std::size_t hidden_width = 8;
  std::size_t layer_count = 2;

  void validate() const;
  /// Widths including input and output, length layer_count + 1.
  std::vector<std::size_t> widths() const;
};

using BackboneConfig = std::variant<MlpConfig, KanConfig>;

std::size_t input_dim(const BackboneConfig& cfg);
std::size_t output_dim(const BackboneConfig& cfg);
std::string backbone_name(const BackboneConfig& cfg);  // "mlp" | "kan"

/// The experiment configurations: MLP 2x100 (sigmoid for 1D problems, tanh
/// otherwise); Chebyshev-KAN with one hidden layer of 8 and degree 5.
MlpConfig default_mlp(std::size_t input_dim);
KanConfig default_kan(std::size_t input_dim);

}  // namespace spinn::networks
