#include "spinn/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinn/error.hpp"
#include "spinn/simd/kernels.hpp"

namespace spinn::training {

using autodiff::Jet;
using autodiff::Var;

namespace {

int derivative_order(const problems::LinearOperator& op, std::size_t d) {
  if (op.second[d] != 0.0) return 2;
  if (op.first[d] != 0.0) return 1;
  return 0;
}

double alpha_at(std::span<const double> a, std::size_t i) { return a.empty() ? 1.0 : a[i]; }

void check_rba_size(std::span<const double> a, std::size_t n, const char* what) {
  if (!a.empty() && a.size() != n) {
    throw ConfigError(std::string("RBA multipliers for ") + what + " have the wrong length");
  }
}

void check_categories(const problems::ProblemSpec& problem, const LossWeights& w,
                      std::size_t n_r, std::size_t n_bc, std::size_t n_ic) {
  if (w.r != 0.0 && n_r == 0) throw ConfigError("residual weight is nonzero but no interior points");
  if (w.bc != 0.0 && n_bc == 0) throw ConfigError("boundary weight is nonzero but no boundary points");
  if (problem.time_dependent() && w.ic != 0.0 && n_ic == 0) {
    throw ConfigError("initial weight is nonzero but no initial points");
  }
}

double mean_scale(double w, std::size_t n) { return n == 0 ? 0.0 : w / static_cast<double>(n); }

}  // namespace

// --- config ---------------------------------------------------------------------

void TrainConfig::validate() const {
  problems::make_problem(problem, epsilon);
  models::model_kind_from_string(model);
  if (backbone != "mlp" && backbone != "kan") {
    throw ConfigError("unknown backbone '" + backbone + "' (expected mlp or kan)");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(rba_learning_rate >= 0.0 && rba_learning_rate <= 1.0)) {
    throw ConfigError("RBA learning rate must be in [0, 1]");
  }
  for (double w : {weights.ic, weights.bc, weights.r}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be non-negative");
  }
  if (log_every == 0) throw ConfigError("log interval must be positive");
  if (mlp_activation != "auto" && mlp_activation != "tanh" && mlp_activation != "sigmoid") {
    throw ConfigError("unknown activation '" + mlp_activation + "'");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"problem", c.problem},
          {"model", c.model},
          {"backbone", c.backbone},
          {"epsilon", c.epsilon},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"weights", {{"ic", c.weights.ic}, {"bc", c.weights.bc}, {"r", c.weights.r}}},
          {"rba_learning_rate", c.rba_learning_rate},
          {"rba", c.rba},
          {"rba_residual_only", c.rba_residual_only},
          {"seed", c.seed},
          {"sampling",
           {{"interior_1d", c.sampling.interior_1d},
            {"interior_2d", c.sampling.interior_2d},
            {"boundary", c.sampling.boundary},
            {"initial", c.sampling.initial},
            {"boundary_per_face", c.sampling.boundary_per_face}}},
          {"log_every", c.log_every},
          {"mlp_hidden", c.mlp_hidden},
          {"mlp_activation", c.mlp_activation},
          {"kan_degree", c.kan_degree},
          {"kan_hidden", c.kan_hidden}};
}

namespace {

template <class T>
void take(const nlohmann::json& j, const std::string& key, T& out) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

void take_count(const nlohmann::json& j, const std::string& key, std::size_t& out) {
  if (!j.is_number_unsigned() && !(j.is_number_float() && j.get<double>() >= 0.0 &&
                                   j.get<double>() == std::floor(j.get<double>()))) {
    throw ConfigError("config field '" + key + "' must be a non-negative integer");
  }
  out = j.is_number_unsigned() ? j.get<std::size_t>() : static_cast<std::size_t>(j.get<double>());
}

}  // namespace

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "problem") take(v, key, c.problem);
    else if (key == "model") take(v, key, c.model);
    else if (key == "backbone") take(v, key, c.backbone);
    else if (key == "epsilon") take(v, key, c.epsilon);
    else if (key == "iterations") take_count(v, key, c.iterations);
    else if (key == "learning_rate") take(v, key, c.learning_rate);
    else if (key == "rba_learning_rate") take(v, key, c.rba_learning_rate);
    else if (key == "rba") take(v, key, c.rba);
    else if (key == "rba_residual_only") take(v, key, c.rba_residual_only);
    else if (key == "seed") take(v, key, c.seed);
    else if (key == "log_every") take_count(v, key, c.log_every);
    else if (key == "mlp_hidden") take(v, key, c.mlp_hidden);
    else if (key == "mlp_activation") take(v, key, c.mlp_activation);
    else if (key == "kan_degree") take_count(v, key, c.kan_degree);
    else if (key == "kan_hidden") take_count(v, key, c.kan_hidden);
    else if (key == "weights" && v.is_object()) {
      for (const auto& [k, w] : v.items()) {
        if (k == "ic") take(w, "weights.ic", c.weights.ic);
        else if (k == "bc") take(w, "weights.bc", c.weights.bc);
        else if (k == "r") take(w, "weights.r", c.weights.r);
        else throw ConfigError("unknown config field 'weights." + k + "'");
      }
    } else if (key == "sampling" && v.is_object()) {
      for (const auto& [k, w] : v.items()) {
        const std::string name = "sampling." + k;
        if (k == "interior_1d") take_count(w, name, c.sampling.interior_1d);
        else if (k == "interior_2d") take_count(w, name, c.sampling.interior_2d);
        else if (k == "boundary") take_count(w, name, c.sampling.boundary);
        else if (k == "initial") take_count(w, name, c.sampling.initial);
        else if (k == "boundary_per_face") take(w, name, c.sampling.boundary_per_face);
        else throw ConfigError("unknown config field '" + name + "'");
      }
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  return c;
}

networks::BackboneConfig make_backbone(const TrainConfig& cfg, std::size_t input_dim) {
  if (cfg.backbone == "kan") {
    networks::KanConfig k = networks::default_kan(input_dim);
    k.degree = cfg.kan_degree;
    k.hidden_width = cfg.kan_hidden;
    k.validate();
    return k;
  }
  if (cfg.backbone != "mlp") throw ConfigError("unknown backbone '" + cfg.backbone + "'");
  networks::MlpConfig m = networks::default_mlp(input_dim);
  m.hidden_widths = cfg.mlp_hidden;
  if (cfg.mlp_activation != "auto") m.activation = networks::activation_from_string(cfg.mlp_activation);
  m.validate();
  return m;
}

models::Model make_model(const TrainConfig& cfg, const problems::ProblemSpec& problem) {
  return models::Model(models::model_kind_from_string(cfg.model),
                       make_backbone(cfg, problem.input_dim), problems::prior_for(problem),
                       problem.epsilon);
}

// --- RBA / Adam -----------------------------------------------------------------

void rba_update(RbaState& rba, std::span<const double> residuals, double eta) {
  if (residuals.size() != rba.alpha.size()) {
    throw ConfigError("residual count does not match RBA multipliers");
  }
  double max_abs = 0.0;
  for (double e : residuals) max_abs = std::max(max_abs, std::abs(e));
  if (max_abs == 0.0) return;
  if (!std::isfinite(max_abs)) throw NumericError("non-finite residual in RBA update");
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double ratio = std::min(1.0, std::abs(residuals[i]) / max_abs);
    rba.alpha[i] = std::clamp((1.0 - eta) * rba.alpha[i] + eta * ratio, 0.0, 1.0);
  }
}

AdamState AdamState::zeros(std::size_t n) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step(AdamState& adam, std::span<double> params, std::span<const double> grad, double lr,
               std::size_t iteration) {
  if (params.size() != grad.size() || adam.m.size() != params.size() ||
      adam.v.size() != params.size()) {
    throw ConfigError("Adam state, parameter, and gradient sizes differ");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient at iteration " + std::to_string(iteration) +
                         " (parameter " + std::to_string(i) + ")");
    }
  }
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  simd::AdamCoefficients c{lr,
                           adam.beta1,
                           adam.beta2,
                           1.0 - adam.beta1,
                           1.0 - adam.beta2,
                           1.0 - std::pow(adam.beta1, t),
                           1.0 - std::pow(adam.beta2, t),
                           adam.eps};
  simd::kernels().adam(c, grad.data(), params.data(), adam.m.data(), adam.v.data(), params.size());
}

// --- reference loss -------------------------------------------------------------

Var assemble_loss(const models::Model& model, std::span<const Var> params,
                  const sampling::SampleSet& samples, const problems::ProblemSpec& problem,
                  const LossWeights& weights, const RbaWeights& rba, LossParts* parts) {
  model.check_params(params.size());
  const PointPredictor u = [&](std::span<const double> x) { return model.predict_jet<Var>(params, x); };
  return assemble_loss(u, samples, problem, weights, rba, parts);
}

Var assemble_loss(const PointPredictor& predict, const sampling::SampleSet& samples,
                  const problems::ProblemSpec& problem, const LossWeights& weights,
                  const RbaWeights& rba, LossParts* parts) {
  const std::size_t n_r = samples.interior.size();
  const std::size_t n_bc = samples.boundary.size();
  const std::size_t n_ic = problem.time_dependent() ? samples.initial.size() : 0;
  check_categories(problem, weights, n_r, n_bc, n_ic);
  check_rba_size(rba.interior, n_r, "interior points");
  check_rba_size(rba.boundary, n_bc, "boundary points");
  check_rba_size(rba.initial, n_ic, "initial points");
  const auto& op = problem.op;

  Var l_r(0.0), l_bc(0.0), l_ic(0.0);
  for (std::size_t i = 0; i < n_r; ++i) {
    const auto x = samples.interior[i];
    const Jet<Var> u = predict(x);
    Var r = Var(op.reaction) * u.v;
    for (std::size_t d = 0; d < problem.input_dim; ++d) {
      r = r + Var(op.first[d]) * u.g[d] + Var(op.second[d]) * u.h[d];
    }
    r = (r - Var(op.forcing_at(x))) * Var(alpha_at(rba.interior, i));
    l_r = l_r + r * r;
  }
  for (std::size_t i = 0; i < n_bc; ++i) {
    const auto x = samples.boundary[i];
    const Var e = (predict(x).v -
                   Var(problem.boundary_value(samples.boundary_faces[i], x))) *
                  Var(alpha_at(rba.boundary, i));
    l_bc = l_bc + e * e;
  }
  for (std::size_t i = 0; i < n_ic; ++i) {
    const auto x = samples.initial[i];
    const Var e = (predict(x).v - Var(problem.initial->value(x))) *
                  Var(alpha_at(rba.initial, i));
    l_ic = l_ic + e * e;
  }
  l_r = l_r * Var(mean_scale(weights.r, n_r));
  l_bc = l_bc * Var(mean_scale(weights.bc, n_bc));
  l_ic = l_ic * Var(mean_scale(weights.ic, n_ic));
  const Var total = l_ic + l_bc + l_r;
  if (parts) *parts = {l_ic.value(), l_bc.value(), l_r.value(), total.value()};
  return total;
}

// --- batched loss ---------------------------------------------------------------

LossEvaluator::LossEvaluator(const models::Model& model, const problems::ProblemSpec& problem,
                             const sampling::SampleSet& samples, const LossWeights& weights)
    : batched_(model),
      op_(problem.op),
      weights_(weights),
      dims_(problem.input_dim),
      n_r_(samples.interior.size()),
      n_bc_(samples.boundary.size()),
      n_ic_(problem.time_dependent() ? samples.initial.size() : 0) {
  if (model.input_dim() != dims_) throw ConfigError("model and problem dimensions differ");
  check_categories(problem, weights, n_r_, n_bc_, n_ic_);

  networks::JetLayout layout;
  layout.dims = dims_;
  layout.points = n_r_ + n_bc_ + n_ic_;
  for (std::size_t d = 0; d < dims_; ++d) {
    layout.order[d] = derivative_order(op_, d);
    layout.deriv_points[d] = layout.order[d] > 0 ? n_r_ : 0;
  }
  layout.finalize();

  networks::Matrix coords;
  coords.resize(dims_, layout.points);
  std::size_t col = 0;
  auto put = [&](std::span<const double> x) {
    for (std::size_t d = 0; d < dims_; ++d) coords.row(d)[col] = x[d];
    ++col;
  };
  forcing_.resize(n_r_);
  for (std::size_t i = 0; i < n_r_; ++i) {
    put(samples.interior[i]);
    forcing_[i] = op_.forcing_at(samples.interior[i]);
  }
  bc_target_.resize(n_bc_);
  for (std::size_t i = 0; i < n_bc_; ++i) {
    put(samples.boundary[i]);
    bc_target_[i] = problem.boundary_value(samples.boundary_faces[i], samples.boundary[i]);
  }
  ic_target_.resize(n_ic_);
  for (std::size_t i = 0; i < n_ic_; ++i) {
    put(samples.initial[i]);
    ic_target_[i] = problem.initial->value(samples.initial[i]);
  }
  batched_.prepare(layout, coords.view());
  residual_.resize(n_r_);
  bc_err_.resize(n_bc_);
  ic_err_.resize(n_ic_);
  adjoint_.resize(batched_.layout().cols);
}

void LossEvaluator::forward(std::span<const double> params) {
  const simd::ScopedFlushDenormals ftz;
  batched_.forward(params);
  const auto& L = batched_.layout();
  const double* out = batched_.output().row(0);
  for (std::size_t i = 0; i < n_r_; ++i) {
    double r = op_.reaction * out[i];
    for (std::size_t d = 0; d < dims_; ++d) {
      if (L.has_g(d)) r += op_.first[d] * out[L.g_offset[d] + i];
      if (L.has_h(d)) r += op_.second[d] * out[L.h_offset[d] + i];
    }
    residual_[i] = r - forcing_[i];
  }
  for (std::size_t i = 0; i < n_bc_; ++i) bc_err_[i] = out[n_r_ + i] - bc_target_[i];
  for (std::size_t i = 0; i < n_ic_; ++i) ic_err_[i] = out[n_r_ + n_bc_ + i] - ic_target_[i];
}

LossParts LossEvaluator::loss(const RbaWeights& rba) const {
  check_rba_size(rba.interior, n_r_, "interior points");
  check_rba_size(rba.boundary, n_bc_, "boundary points");
  check_rba_size(rba.initial, n_ic_, "initial points");
  auto sum_sq = [](std::span<const double> e, std::span<const double> a) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double v = alpha_at(a, i) * e[i];
      s += v * v;
    }
    return s;
  };
  LossParts p;
  p.r = mean_scale(weights_.r, n_r_) * sum_sq(residual_, rba.interior);
  p.bc = mean_scale(weights_.bc, n_bc_) * sum_sq(bc_err_, rba.boundary);
  p.ic = mean_scale(weights_.ic, n_ic_) * sum_sq(ic_err_, rba.initial);
  p.total = p.ic + p.bc + p.r;
  return p;
}

void LossEvaluator::gradient(std::span<const double> params, const RbaWeights& rba,
                             std::span<double> grad) {
  const simd::ScopedFlushDenormals ftz;
  check_rba_size(rba.interior, n_r_, "interior points");
  check_rba_size(rba.boundary, n_bc_, "boundary points");
  check_rba_size(rba.initial, n_ic_, "initial points");
  const auto& L = batched_.layout();
  std::fill(adjoint_.begin(), adjoint_.end(), 0.0);
  const double sr = 2.0 * mean_scale(weights_.r, n_r_);
  for (std::size_t i = 0; i < n_r_; ++i) {
    const double a = alpha_at(rba.interior, i);
    const double z = sr * a * a * residual_[i];
    adjoint_[i] = z * op_.reaction;
    for (std::size_t d = 0; d < dims_; ++d) {
      if (L.has_g(d)) adjoint_[L.g_offset[d] + i] = z * op_.first[d];
      if (L.has_h(d)) adjoint_[L.h_offset[d] + i] = z * op_.second[d];
    }
  }
  const double sb = 2.0 * mean_scale(weights_.bc, n_bc_);
  for (std::size_t i = 0; i < n_bc_; ++i) {
    const double a = alpha_at(rba.boundary, i);
    adjoint_[n_r_ + i] = sb * a * a * bc_err_[i];
  }
  const double si = 2.0 * mean_scale(weights_.ic, n_ic_);
  for (std::size_t i = 0; i < n_ic_; ++i) {
    const double a = alpha_at(rba.initial, i);
    adjoint_[n_r_ + n_bc_ + i] = si * a * a * ic_err_[i];
  }
  batched_.backward(params, adjoint_, grad);
}

// --- loop -----------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const problems::ProblemSpec problem = problems::make_problem(cfg.problem, cfg.epsilon);
  const models::Model model = make_model(cfg, problem);
  const sampling::SampleSet samples = sampling::sample_problem(problem, cfg.seed, cfg.sampling);
  return train(cfg, model, problem, samples, progress);
}

TrainResult train(const TrainConfig& cfg, const models::Model& model,
                  const problems::ProblemSpec& problem, const sampling::SampleSet& samples,
                  const ProgressFn& progress) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  TrainResult result;
  result.tensors = model.tensor_table();
  const networks::NetworkParams init = model.init_params(cfg.seed);
  std::vector<double> params(init.values().begin(), init.values().end());
  result.params = params;

  LossEvaluator eval(model, problem, samples, cfg.weights);
  RbaState rba_r = RbaState::ones(eval.interior_count());
  RbaState rba_b = RbaState::ones(eval.boundary_count());
  RbaState rba_i = RbaState::ones(eval.initial_count());
  const bool rba_all = cfg.rba && !cfg.rba_residual_only;
  AdamState adam = AdamState::zeros(params.size());
  std::vector<double> grad(params.size());

  auto weights = [&]() -> RbaWeights {
    if (!cfg.rba) return {};
    if (!rba_all) return {rba_r.alpha, {}, {}};
    return {rba_r.alpha, rba_b.alpha, rba_i.alpha};
  };
  auto record = [&](std::size_t it, const LossParts& loss) {
    result.history.push_back({it, loss, elapsed()});
    if (progress) progress(result.history.back());
  };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    eval.forward(params);
    if (cfg.rba) {
      rba_update(rba_r, eval.residuals(), cfg.rba_learning_rate);
      if (rba_all) {
        rba_update(rba_b, eval.boundary_errors(), cfg.rba_learning_rate);
        rba_update(rba_i, eval.initial_errors(), cfg.rba_learning_rate);
      }
    }
    const LossParts loss = eval.loss(weights());
    if (!std::isfinite(loss.total)) {
      result.abort_reason = "non-finite loss at iteration " + std::to_string(it);
      break;
    }
    result.params = params;
    if (it % cfg.log_every == 0) record(it, loss);
    std::fill(grad.begin(), grad.end(), 0.0);
    try {
      eval.gradient(params, weights(), grad);
      adam_step(adam, params, grad, cfg.learning_rate, it);
    } catch (const NumericError& e) {
      result.abort_reason = e.what();
      break;
    }
    result.iterations = it + 1;
  }

  if (!result.abort_reason && cfg.iterations > 0) {
    eval.forward(params);
    const LossParts loss = eval.loss(weights());
    if (std::isfinite(loss.total)) {
      result.params = params;
      record(cfg.iterations, loss);
    } else {
      result.abort_reason = "non-finite loss after the final step";
    }
  }
  result.rba_alpha = rba_r.alpha;
  result.wall_seconds = !result.abort_reason && cfg.iterations > 0 ? result.history.back().seconds : elapsed();
  return result;
}

// --- checkpoints ----------------------------------------------------------------

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& t : ck.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}});
    total = std::max(total, t.offset + t.size());
  }
  if (total != ck.params.size()) throw ConfigError("checkpoint values do not match the tensor table");
  for (double v : ck.params) {
    if (!std::isfinite(v)) throw NumericError("refusing to checkpoint non-finite parameters");
  }
  nlohmann::json j{{"format", "spinn-checkpoint-1"},
                   {"tensors", tensors},
                   {"values", ck.params},
                   {"meta", ck.meta.is_null() ? nlohmann::json::object() : ck.meta}};
  std::ofstream out(path);
  out << j.dump() << "\n";
  if (!out) throw ConfigError("cannot write " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("no checkpoint at " + path.string());
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "spinn-checkpoint-1") throw ConfigError("unsupported checkpoint format");
    for (const auto& t : j.at("tensors")) {
      ck.tensors.push_back({t.at("name"), t.at("shape").get<std::vector<std::size_t>>(), t.at("offset")});
    }
    ck.params = j.at("values").get<std::vector<double>>();
    ck.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  std::size_t total = 0;
  for (const auto& t : ck.tensors) total = std::max(total, t.offset + t.size());
  if (total != ck.params.size()) throw ConfigError("checkpoint values do not match the tensor table");
  return ck;
}

// --- loss CSV -------------------------------------------------------------------

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history) {
  std::ofstream out(path);
  if (!out) throw LookupError("cannot write " + path.string());
  out << "iteration,loss_ic,loss_bc,loss_r,loss_total,seconds_elapsed\n";
  char buf[256];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", h.iteration, h.loss.ic,
                  h.loss.bc, h.loss.r, h.loss.total, h.seconds);
    out << buf;
  }
  if (!out) throw LookupError("failed writing " + path.string());
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "iteration,loss_ic,loss_bc,loss_r,loss_total,seconds_elapsed") {
    throw ConfigError(path.string() + " is not a loss history file");
  }
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRecord r;
    std::istringstream ss(line);
    char c1, c2, c3, c4, c5;
    if (!(ss >> r.iteration >> c1 >> r.loss.ic >> c2 >> r.loss.bc >> c3 >> r.loss.r >> c4 >>
          r.loss.total >> c5 >> r.seconds)) {
      throw ConfigError("malformed line in " + path.string() + ": " + line);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace spinn::training
