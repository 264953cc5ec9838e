#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/autodiff/tape.hpp"
#include "spinn/models/batched_model.hpp"
#include "spinn/models/model.hpp"
#include "spinn/networks/params.hpp"
#include "spinn/problems/problem.hpp"
#include "spinn/sampling/sampling.hpp"

namespace spinn::training {

struct LossWeights {
  double ic = 1.0;
  double bc = 1.0;
  double r = 1.0;
};

struct TrainConfig {
  std::string problem = "ex1";
  std::string model = "aspinn";   // pinn | gkpinn | aspinn
  std::string backbone = "mlp";   // mlp | kan
  double epsilon = 1e-3;
  std::size_t iterations = 100000;
  double learning_rate = 1e-3;
  LossWeights weights;
  double rba_learning_rate = 1e-4;
  bool rba = true;
  /// Multipliers on residual points only; otherwise boundary and initial
  /// points get their own.
  bool rba_residual_only = true;
  std::uint64_t seed = 0;
  sampling::SampleConfig sampling;
  std::size_t log_every = 100;

  // Backbone shape.
  std::vector<std::size_t> mlp_hidden{100, 100};
  std::string mlp_activation = "auto";  // auto | tanh | sigmoid
  std::size_t kan_degree = 5;
  std::size_t kan_hidden = 8;

  void validate() const;
};

/// Field names mirror TrainConfig; nested objects for weights and sampling.
nlohmann::json to_json(const TrainConfig& cfg);
/// Overrides fields of `base` from `j`. Unknown keys raise ConfigError.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

networks::BackboneConfig make_backbone(const TrainConfig& cfg, std::size_t input_dim);
models::Model make_model(const TrainConfig& cfg, const problems::ProblemSpec& problem);

// --- RBA ------------------------------------------------------------------------

struct RbaState {
  std::vector<double> alpha;

  static RbaState ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
};

/// alpha_i <- (1 - eta) alpha_i + eta |e_i| / max_j |e_j|. All-zero residuals
/// leave alpha untouched.
void rba_update(RbaState& rba, std::span<const double> residuals, double eta);

// --- Adam -----------------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(std::size_t n);
};

/// One bias-corrected Adam step. Throws NumericError naming `iteration` and
/// the parameter index if a gradient entry is not finite.
void adam_step(AdamState& adam, std::span<double> params, std::span<const double> grad, double lr,
               std::size_t iteration = 0);

// --- loss -----------------------------------------------------------------------

struct LossParts {
  double ic = 0.0;
  double bc = 0.0;
  double r = 0.0;
  double total = 0.0;
};

/// Multipliers for one loss evaluation. Empty vectors mean all ones.
struct RbaWeights {
  std::span<const double> interior;
  std::span<const double> boundary;
  std::span<const double> initial;
};

/// Second-order jet of a candidate solution at one point.
using PointPredictor = std::function<autodiff::Jet<autodiff::Var>(std::span<const double>)>;

/// Reference loss built on the tape through per-point jets; slow, used to
/// check the batched evaluator.
autodiff::Var assemble_loss(const PointPredictor& u, const sampling::SampleSet& samples,
                            const problems::ProblemSpec& problem, const LossWeights& weights,
                            const RbaWeights& rba = {}, LossParts* parts = nullptr);
autodiff::Var assemble_loss(const models::Model& model, std::span<const autodiff::Var> params,
                            const sampling::SampleSet& samples,
                            const problems::ProblemSpec& problem, const LossWeights& weights,
                            const RbaWeights& rba = {}, LossParts* parts = nullptr);

/// Batched loss and gradient over a fixed sample set.
class LossEvaluator {
 public:
  LossEvaluator(const models::Model& model, const problems::ProblemSpec& problem,
                const sampling::SampleSet& samples, const LossWeights& weights);

  /// Runs the model on all points; residuals and boundary misfits follow.
  void forward(std::span<const double> params);
  std::span<const double> residuals() const { return residual_; }
  std::span<const double> boundary_errors() const { return bc_err_; }
  std::span<const double> initial_errors() const { return ic_err_; }

  LossParts loss(const RbaWeights& rba = {}) const;
  /// Adds d(loss)/d(params) to grad. Follows forward() with the same params.
  void gradient(std::span<const double> params, const RbaWeights& rba, std::span<double> grad);

  std::size_t interior_count() const { return n_r_; }
  std::size_t boundary_count() const { return n_bc_; }
  std::size_t initial_count() const { return n_ic_; }

 private:
  models::BatchedModel batched_;
  problems::LinearOperator op_;
  LossWeights weights_;
  std::size_t dims_;
  std::size_t n_r_, n_bc_, n_ic_;
  std::vector<double> forcing_, bc_target_, ic_target_;
  std::vector<double> residual_, bc_err_, ic_err_;
  std::vector<double> adjoint_;
};

// --- loop -----------------------------------------------------------------------

struct LossRecord {
  std::size_t iteration = 0;
  LossParts loss;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<double> params;  // last good parameters
  std::vector<networks::TensorSpec> tensors;
  std::vector<LossRecord> history;
  double wall_seconds = 0.0;
  std::size_t iterations = 0;  // completed Adam steps
  std::optional<std::string> abort_reason;
  std::vector<double> rba_alpha;
};

/// Progress callback, called with every logged record.
using ProgressFn = std::function<void(const LossRecord&)>;

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = {});
/// Trains on a caller-supplied model, problem, and samples.
TrainResult train(const TrainConfig& cfg, const models::Model& model,
                  const problems::ProblemSpec& problem, const sampling::SampleSet& samples,
                  const ProgressFn& progress = {});

/// JSON document: tensor table, flat values (round-trip exact), and free-form metadata.
struct Checkpoint {
  std::vector<networks::TensorSpec> tensors;
  std::vector<double> params;
  nlohmann::json meta;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> history);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

}  // namespace spinn::training
