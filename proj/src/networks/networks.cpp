#include <cmath>
#include <stdexcept>
#include <string>

#include "spinn/error.hpp"
#include "spinn/networks/config.hpp"
#include "spinn/networks/forward.hpp"
#include "spinn/networks/init.hpp"
#include "spinn/networks/params.hpp"

namespace spinn::networks {

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "sigmoid"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or sigmoid)");
}

void MlpConfig::validate() const {
  if (hidden_widths.empty()) throw ConfigError("MLP needs at least one hidden layer");
  if (input_dim == 0 || output_dim == 0) throw ConfigError("MLP dimensions must be >= 1");
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw ConfigError("MLP hidden widths must be >= 1");
  }
}

void KanConfig::validate() const {
  if (degree == 0) throw ConfigError("Chebyshev degree must be >= 1");
  if (input_dim == 0 || output_dim == 0 || layer_count == 0) {
    throw ConfigError("KAN dimensions and layer count must be >= 1");
  }
  if (layer_count > 1 && hidden_width == 0) throw ConfigError("KAN hidden width must be >= 1");
}

std::vector<std::size_t> KanConfig::widths() const {
  std::vector<std::size_t> w{input_dim};
  for (std::size_t l = 1; l < layer_count; ++l) w.push_back(hidden_width);
  w.push_back(output_dim);
  return w;
}

std::size_t input_dim(const BackboneConfig& cfg) {
  return std::visit([](const auto& c) { return c.input_dim; }, cfg);
}

std::size_t output_dim(const BackboneConfig& cfg) {
  return std::visit([](const auto& c) { return c.output_dim; }, cfg);
}

std::string backbone_name(const BackboneConfig& cfg) {
  return std::holds_alternative<MlpConfig>(cfg) ? "mlp" : "kan";
}

MlpConfig default_mlp(std::size_t input_dim) {
  MlpConfig c;
  c.input_dim = input_dim;
  c.hidden_widths = {100, 100};
  c.output_dim = 1;
  c.activation = input_dim == 1 ? Activation::kSigmoid : Activation::kTanh;
  return c;
}

KanConfig default_kan(std::size_t input_dim) {
  KanConfig c;
  c.input_dim = input_dim;
  c.output_dim = 1;
  c.degree = 5;
  c.hidden_width = 8;
  c.layer_count = 2;
  return c;
}

// --- shape tables -----------------------------------------------------------

std::size_t TensorSpec::size() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

std::vector<DenseSlice> mlp_slices(const MlpConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> widths{cfg.input_dim};
  widths.insert(widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
  widths.push_back(cfg.output_dim);
  std::vector<DenseSlice> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseSlice s{offset, offset + widths[l] * widths[l + 1], widths[l], widths[l + 1]};
    offset = s.b_offset + s.out;
    out.push_back(s);
  }
  return out;
}

std::vector<ChebSlice> kan_slices(const KanConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> w = cfg.widths();
  std::vector<ChebSlice> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    out.push_back(ChebSlice{offset, w[l], w[l + 1], cfg.degree});
    offset += w[l] * w[l + 1] * (cfg.degree + 1);
  }
  return out;
}

std::size_t param_count(const BackboneConfig& cfg) {
  std::size_t n = 0;
  for (const TensorSpec& t : tensor_table(cfg)) n += t.size();
  return n;
}

std::vector<TensorSpec> tensor_table(const BackboneConfig& cfg, const std::string& prefix) {
  std::vector<TensorSpec> table;
  if (const auto* mlp = std::get_if<MlpConfig>(&cfg)) {
    const auto slices = mlp_slices(*mlp);
    for (std::size_t l = 0; l < slices.size(); ++l) {
      const std::string idx = std::to_string(l);
      table.push_back({prefix + "W" + idx, {slices[l].out, slices[l].in}, slices[l].w_offset});
      table.push_back({prefix + "b" + idx, {slices[l].out}, slices[l].b_offset});
    }
  } else {
    const auto slices = kan_slices(std::get<KanConfig>(cfg));
    for (std::size_t l = 0; l < slices.size(); ++l) {
      table.push_back({prefix + "theta" + std::to_string(l),
                       {slices[l].in, slices[l].out, slices[l].degree + 1},
                       slices[l].offset});
    }
  }
  return table;
}

std::vector<double> chebyshev_basis(double x_norm, std::size_t n) {
  if (!(std::abs(x_norm) <= 1.0)) {
    throw std::domain_error("Chebyshev argument outside [-1, 1]: " + std::to_string(x_norm));
  }
  std::vector<double> t(n + 1);
  t[0] = 1.0;
  if (n >= 1) t[1] = x_norm;
  for (std::size_t k = 2; k <= n; ++k) t[k] = 2.0 * x_norm * t[k - 1] - t[k - 2];
  return t;
}

// --- NetworkParams -------------------------------------------------------------

NetworkParams NetworkParams::zeros(std::vector<TensorSpec> table) {
  NetworkParams p;
  std::size_t offset = 0;
  for (TensorSpec& t : table) {
    t.offset = offset;
    offset += t.size();
  }
  p.table_ = std::move(table);
  p.values_.assign(offset, 0.0);
  return p;
}

const TensorSpec& NetworkParams::spec(std::string_view name) const {
  for (const TensorSpec& t : table_) {
    if (t.name == name) return t;
  }
  throw LookupError("no tensor named '" + std::string(name) + "'");
}

std::span<double> NetworkParams::tensor(std::string_view name) {
  const TensorSpec& t = spec(name);
  return std::span<double>(values_).subspan(t.offset, t.size());
}

std::span<const double> NetworkParams::tensor(std::string_view name) const {
  const TensorSpec& t = spec(name);
  return std::span<const double>(values_).subspan(t.offset, t.size());
}

std::map<std::string, std::vector<double>> NetworkParams::unpack() const {
  std::map<std::string, std::vector<double>> out;
  for (const TensorSpec& t : table_) {
    auto s = tensor(t.name);
    out.emplace(t.name, std::vector<double>(s.begin(), s.end()));
  }
  return out;
}

void NetworkParams::pack(const std::map<std::string, std::vector<double>>& tensors) {
  if (tensors.size() != table_.size()) throw ConfigError("tensor count does not match shape table");
  for (const TensorSpec& t : table_) {
    auto it = tensors.find(t.name);
    if (it == tensors.end()) throw ConfigError("missing tensor '" + t.name + "'");
    if (it->second.size() != t.size()) throw ConfigError("size mismatch for tensor '" + t.name + "'");
    std::copy(it->second.begin(), it->second.end(), values_.begin() + t.offset);
  }
}

// --- plain forward ---------------------------------------------------------------

std::vector<double> mlp_forward(const NetworkParams& params, std::span<const double> x,
                                const MlpConfig& cfg) {
  if (x.size() != cfg.input_dim) throw ConfigError("input dimension mismatch");
  if (params.size() != param_count(cfg)) throw ConfigError("parameter count mismatch for MLP");
  return mlp_apply<double, double>(cfg, params.values(), x);
}

std::vector<double> kan_forward(const NetworkParams& params, std::span<const double> x,
                                const KanConfig& cfg) {
  if (x.size() != cfg.input_dim) throw ConfigError("input dimension mismatch");
  if (params.size() != param_count(cfg)) throw ConfigError("parameter count mismatch for KAN");
  return kan_apply<double, double>(cfg, params.values(), x);
}

// --- initialization --------------------------------------------------------------

void init_values(const BackboneConfig& cfg, Rng& rng, std::span<double> values) {
  if (values.size() != param_count(cfg)) throw ConfigError("parameter count mismatch");
  if (const auto* mlp = std::get_if<MlpConfig>(&cfg)) {
    for (const DenseSlice& s : mlp_slices(*mlp)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
      for (std::size_t i = 0; i < s.in * s.out; ++i) values[s.w_offset + i] = rng.uniform(-limit, limit);
      for (std::size_t o = 0; o < s.out; ++o) values[s.b_offset + o] = 0.0;
    }
    return;
  }
  for (const ChebSlice& s : kan_slices(std::get<KanConfig>(cfg))) {
    const double limit = 1.0 / static_cast<double>(s.in * (s.degree + 1));
    const std::size_t n = s.in * s.out * (s.degree + 1);
    for (std::size_t i = 0; i < n; ++i) values[s.offset + i] = rng.uniform(-limit, limit);
  }
}

NetworkParams init_params(const BackboneConfig& cfg, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(tensor_table(cfg));
  Rng rng(seed);
  init_values(cfg, rng, p.values());
  return p;
}

}  // namespace spinn::networks
