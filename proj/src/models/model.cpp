#include "spinn/models/model.hpp"

#include <algorithm>

#include "spinn/autodiff/derivatives.hpp"
#include "spinn/networks/init.hpp"
#include "spinn/random.hpp"

namespace spinn::models {

namespace {

constexpr double kUnderflowExponent = -745.0;

}  // namespace

double AsymptoticPrior::distance(std::span<const double> x) const {
  return std::max(0.0, inward() * (x[normal_dim] - position));
}

std::vector<double> AsymptoticPrior::project(std::span<const double> x) const {
  std::vector<double> p(x.begin(), x.end());
  p[normal_dim] = position;
  return p;
}

double AsymptoticPrior::tangential(std::span<const double> x) const {
  return x.size() > 1 ? x[1 - normal_dim] : 0.0;
}

TraceValue AsymptoticPrior::trace_at(std::span<const double> x) const {
  return trace ? trace(tangential(x)) : TraceValue{};
}

void AsymptoticPrior::validate(std::size_t input_dim) const {
  if (normal_dim >= input_dim) throw ConfigError("prior normal dimension out of range");
  if (!(position >= 0.0 && position <= 1.0)) throw ConfigError("layer position must be in [0, 1]");
  if (!(decay > 0.0)) throw ConfigError("decay coefficient must be positive");
}

double exp_layer(std::span<const double> x, const AsymptoticPrior& prior, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const double exponent = -prior.decay * prior.distance(x) / epsilon;
  if (exponent <= kUnderflowExponent) return 0.0;
  return std::exp(exponent);
}

Jet<double> exp_layer_jet(std::span<const double> x, const AsymptoticPrior& prior, double epsilon) {
  const double e = exp_layer(x, prior, epsilon);
  const double rate = prior.decay / epsilon;
  Jet<double> j = Jet<double>::constant(e);
  j.g[prior.normal_dim] = -rate * prior.inward() * e;
  j.h[prior.normal_dim] = rate * rate * e;
  return j;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPinn:
      return "pinn";
    case ModelKind::kGkpinn:
      return "gkpinn";
    case ModelKind::kAspinn:
      return "aspinn";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "pinn") return ModelKind::kPinn;
  if (s == "gkpinn") return ModelKind::kGkpinn;
  if (s == "aspinn") return ModelKind::kAspinn;
  throw ConfigError("unknown model '" + s + "' (expected pinn, gkpinn or aspinn)");
}

Model::Model(ModelKind kind, networks::BackboneConfig backbone, std::vector<AsymptoticPrior> priors,
             double epsilon)
    : kind_(kind), backbone_(std::move(backbone)), priors_(std::move(priors)), epsilon_(epsilon) {
  std::visit([](const auto& c) { c.validate(); }, backbone_);
  if (networks::output_dim(backbone_) != 1) throw ConfigError("models need a scalar backbone output");
  if (input_dim() > autodiff::kMaxDim) throw ConfigError("models support 1 or 2 input dimensions");
  if (!(epsilon_ > 0.0)) throw ConfigError("epsilon must be positive");
  for (const AsymptoticPrior& p : priors_) p.validate(input_dim());
  for (const AsymptoticPrior& p : priors_) {
    if (p.normal_dim != priors_.front().normal_dim) {
      throw ConfigError("all priors must share one normal dimension");
    }
  }
  if (kind_ == ModelKind::kPinn) priors_.clear();
  backbone_size_ = networks::param_count(backbone_);
}

std::size_t Model::network_count() const {
  return kind_ == ModelKind::kGkpinn ? 1 + priors_.size() : 1;
}

std::vector<networks::TensorSpec> Model::tensor_table() const {
  std::vector<networks::TensorSpec> table;
  for (std::size_t k = 0; k < network_count(); ++k) {
    auto t = networks::tensor_table(backbone_, "net" + std::to_string(k) + ".");
    for (auto& spec : t) spec.offset += k * backbone_size_;
    table.insert(table.end(), t.begin(), t.end());
  }
  return table;
}

networks::NetworkParams Model::init_params(std::uint64_t seed) const {
  networks::NetworkParams p = networks::NetworkParams::zeros(tensor_table());
  Rng rng(seed);
  for (std::size_t k = 0; k < network_count(); ++k) {
    networks::init_values(backbone_, rng, p.values().subspan(k * backbone_size_, backbone_size_));
  }
  return p;
}

void Model::check_params(std::size_t n) const {
  if (n != param_count()) {
    throw ConfigError("model expects " + std::to_string(param_count()) + " parameters, got " +
                      std::to_string(n));
  }
}

double Model::predict(std::span<const double> params, std::span<const double> x) const {
  check_params(params.size());
  if (x.size() != input_dim()) throw ConfigError("point dimension does not match model");
  auto net = [&](std::size_t k, std::span<const double> at) {
    return networks::backbone_apply<double, double>(
        backbone_, params.subspan(k * backbone_size_, backbone_size_), at)[0];
  };
  double u = net(0, x);
  for (std::size_t i = 0; i < priors_.size(); ++i) {
    const double e = exp_layer(x, priors_[i], epsilon_);
    if (kind_ == ModelKind::kGkpinn) {
      u += net(i + 1, x) * e;
    } else {
      u += (priors_[i].trace_at(x).v - net(0, priors_[i].project(x))) * e;
    }
  }
  return u;
}

autodiff::DerivativeBundle Model::derivatives(std::span<const double> params,
                                              std::span<const double> x) const {
  check_params(params.size());
  std::vector<autodiff::Var> p(params.begin(), params.end());
  autodiff::JetPredictor f = [&](std::span<const Jet<autodiff::Var>>) {
    return predict_jet<autodiff::Var>(p, x);
  };
  return autodiff::eval_with_input_derivatives(f, input_dim(), x);
}

double pinn_predict(const networks::NetworkParams& params, std::span<const double> x,
                    const networks::BackboneConfig& backbone) {
  return Model(ModelKind::kPinn, backbone, {}, 1.0).predict(params.values(), x);
}

double gkpinn_predict(const std::vector<networks::NetworkParams>& params_list,
                      std::span<const double> x, const std::vector<AsymptoticPrior>& priors,
                      double epsilon, const networks::BackboneConfig& backbone) {
  if (params_list.size() != 1 + priors.size()) {
    throw ConfigError("GKPINN needs one parameter set per prior plus one");
  }
  std::vector<double> flat;
  for (const auto& p : params_list) flat.insert(flat.end(), p.values().begin(), p.values().end());
  return Model(ModelKind::kGkpinn, backbone, priors, epsilon).predict(flat, x);
}

double aspinn_predict(const networks::NetworkParams& params, std::span<const double> x,
                      const std::vector<AsymptoticPrior>& priors, double epsilon,
                      const networks::BackboneConfig& backbone) {
  return Model(ModelKind::kAspinn, backbone, priors, epsilon).predict(params.values(), x);
}

}  // namespace spinn::models
