#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spinn/autodiff/jet.hpp"
#include "spinn/autodiff/tape.hpp"
#include "spinn/error.hpp"
#include "spinn/networks/config.hpp"
#include "spinn/networks/forward.hpp"
#include "spinn/networks/params.hpp"

namespace spinn::models {

using autodiff::Jet;

/// Boundary trace value and its first two derivatives along the tangential
/// coordinate (zero derivatives in 1D).
struct TraceValue {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

struct AsymptoticPrior {
  std::size_t normal_dim = 0;
  double position = 0.0;  // a
  double decay = 1.0;     // |b(a)|
  std::function<TraceValue(double tangential)> trace;

  /// +1 when the domain lies on the positive side of the layer.
  double inward() const { return position < 0.5 ? 1.0 : -1.0; }
  /// Distance to the layer, clamped at 0.
  double distance(std::span<const double> x) const;
  /// x with coordinate normal_dim pinned to the layer position.
  std::vector<double> project(std::span<const double> x) const;
  /// Tangential coordinate of x (0 in 1D).
  double tangential(std::span<const double> x) const;
  TraceValue trace_at(std::span<const double> x) const;
  void validate(std::size_t input_dim) const;
};

/// exp(-|b| d / eps) in [0, 1]; exactly 0 once the exponent reaches -745.
double exp_layer(std::span<const double> x, const AsymptoticPrior& prior, double epsilon);

/// exp_layer with its derivatives along the normal dimension.
Jet<double> exp_layer_jet(std::span<const double> x, const AsymptoticPrior& prior, double epsilon);

enum class ModelKind { kPinn, kGkpinn, kAspinn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

class Model {
 public:
  /// GKPINN and ASPINN with no priors are allowed and reduce to PINN.
  Model(ModelKind kind, networks::BackboneConfig backbone, std::vector<AsymptoticPrior> priors,
        double epsilon);

  ModelKind kind() const { return kind_; }
  const networks::BackboneConfig& backbone() const { return backbone_; }
  const std::vector<AsymptoticPrior>& priors() const { return priors_; }
  double epsilon() const { return epsilon_; }
  std::size_t input_dim() const { return networks::input_dim(backbone_); }

  /// 1 + N backbones for GKPINN, 1 otherwise.
  std::size_t network_count() const;
  std::size_t backbone_size() const { return backbone_size_; }
  std::size_t param_count() const { return backbone_size_ * network_count(); }
  /// Backbone k occupies [k * backbone_size, (k + 1) * backbone_size) with
  /// tensors prefixed "net<k>.".
  std::vector<networks::TensorSpec> tensor_table() const;
  networks::NetworkParams init_params(std::uint64_t seed) const;

  double predict(std::span<const double> params, std::span<const double> x) const;

  /// Second-order jet of the composed prediction at x. S = double or Var.
  template <class S>
  Jet<S> predict_jet(std::span<const S> params, std::span<const double> x) const;

  /// Value and pure input derivatives through the checked reference route.
  autodiff::DerivativeBundle derivatives(std::span<const double> params,
                                         std::span<const double> x) const;

  void check_params(std::size_t n) const;

 private:
  template <class S>
  Jet<S> backbone_jet(std::span<const S> params, std::size_t k, std::span<const double> x,
                      std::size_t pinned_dim, double pinned_value) const;

  ModelKind kind_;
  networks::BackboneConfig backbone_;
  std::vector<AsymptoticPrior> priors_;
  double epsilon_;
  std::size_t backbone_size_;
};

// Named predictors mirroring the three compositions.
double pinn_predict(const networks::NetworkParams& params, std::span<const double> x,
                    const networks::BackboneConfig& backbone);
double gkpinn_predict(const std::vector<networks::NetworkParams>& params_list,
                      std::span<const double> x, const std::vector<AsymptoticPrior>& priors,
                      double epsilon, const networks::BackboneConfig& backbone);
double aspinn_predict(const networks::NetworkParams& params, std::span<const double> x,
                      const std::vector<AsymptoticPrior>& priors, double epsilon,
                      const networks::BackboneConfig& backbone);

// --- template definitions ---------------------------------------------------------

template <class S>
Jet<S> Model::backbone_jet(std::span<const S> params, std::size_t k, std::span<const double> x,
                           std::size_t pinned_dim, double pinned_value) const {
  std::vector<Jet<S>> xs;
  xs.reserve(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (d == pinned_dim) {
      xs.push_back(Jet<S>::constant(S(pinned_value)));
    } else {
      xs.push_back(Jet<S>::coordinate(S(x[d]), d));
    }
  }
  const auto slice = params.subspan(k * backbone_size_, backbone_size_);
  return networks::backbone_apply<Jet<S>, S>(backbone_, slice, xs)[0];
}

template <class S>
Jet<S> Model::predict_jet(std::span<const S> params, std::span<const double> x) const {
  check_params(params.size());
  if (x.size() != input_dim()) throw ConfigError("point dimension does not match model");
  constexpr std::size_t kFree = autodiff::kMaxDim;
  Jet<S> u = backbone_jet(params, 0, x, kFree, 0.0);
  if (kind_ == ModelKind::kPinn) return u;
  for (std::size_t i = 0; i < priors_.size(); ++i) {
    const AsymptoticPrior& prior = priors_[i];
    const Jet<S> e = autodiff::lift<S>(exp_layer_jet(x, prior, epsilon_));
    if (kind_ == ModelKind::kGkpinn) {
      u = u + backbone_jet(params, i + 1, x, kFree, 0.0) * e;
      continue;
    }
    const TraceValue g = prior.trace_at(x);
    Jet<S> gj = Jet<S>::constant(S(g.v));
    if (x.size() > 1) {
      const std::size_t t = 1 - prior.normal_dim;
      gj.g[t] = S(g.d1);
      gj.h[t] = S(g.d2);
    }
    const Jet<S> u_proj = backbone_jet(params, 0, x, prior.normal_dim, prior.position);
    u = u + (gj - u_proj) * e;
  }
  return u;
}

}  // namespace spinn::models
