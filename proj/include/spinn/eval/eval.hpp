#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/fdm/fdm.hpp"
#include "spinn/models/model.hpp"
#include "spinn/problems/problem.hpp"
#include "spinn/simd/kernels.hpp"
#include "spinn/training/training.hpp"

namespace spinn::eval {

/// sqrt(sum (p - t)^2 / sum t^2). Throws EvalError on empty or mismatched
/// inputs and on an all-zero truth.
double relative_l2(std::span<const double> predicted, std::span<const double> truth);

/// Closed-form values on the nodes of a layer-resolving Shishkin mesh.
fdm::GridSolution analytic_test_set(const problems::ProblemSpec& problem, std::size_t n = 1024);

/// Default file name for a frozen PDE test set.
std::string test_set_name(const problems::ProblemSpec& problem, std::size_t n, std::size_t m);

/// Reads a frozen grid and checks it belongs to `problem`. A missing file
/// raises LookupError with the command that regenerates it.
fdm::GridSolution load_test_set(const std::filesystem::path& csv,
                                const problems::ProblemSpec& problem);

/// Pointwise comparison on a test grid, in grid storage order.
struct ErrorField {
  std::vector<std::string> coord_names;
  std::vector<std::vector<double>> coords;
  std::vector<double> truth;
  std::vector<double> prediction;
  std::vector<double> error;  // prediction - truth
  std::size_t nx = 0;
  std::size_t ny = 1;

  std::size_t size() const { return truth.size(); }
  double relative_l2() const { return eval::relative_l2(prediction, truth); }
};

/// Values at the columns of a dims x n coordinate matrix.
using BatchPredictor = std::function<std::vector<double>(simd::ConstMatrixView)>;

ErrorField evaluate(const BatchPredictor& predict, const fdm::GridSolution& test);
ErrorField evaluate(const models::Model& model, std::span<const double> params,
                    const fdm::GridSolution& test);

struct EvalReport {
  std::string problem;
  std::string model;
  std::string backbone;
  double epsilon = 0.0;
  double relative_l2 = 0.0;
  double wall_seconds = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::string test_set;     // "analytic" or the grid file
  std::string error_field;  // file name of the pointwise field
  std::string abort_reason;
  std::vector<std::string> files;
  nlohmann::json config;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
void write_report(const EvalReport& r, const std::filesystem::path& path);
/// Throws LookupError naming the path when it does not exist.
EvalReport read_report(const std::filesystem::path& path);

// --- artifacts ------------------------------------------------------------------

/// Columns: coordinates, truth, prediction, error.
void write_field_csv(const ErrorField& f, const std::filesystem::path& path);
ErrorField read_field_csv(const std::filesystem::path& path);

/// Line plot of truth and prediction (1D) or prediction and |error|
/// heatmaps embedded as PNG images with one pixel per grid node (2D).
void write_solution_svg(const ErrorField& f, const std::string& title,
                        const std::filesystem::path& path);
/// Log-scale loss history over [0, iterations].
void write_loss_svg(std::span<const training::LossRecord> history, std::size_t iterations,
                    const std::filesystem::path& path);

/// RGB heatmap, one pixel per node; image row 0 is the largest y.
std::vector<unsigned char> heatmap_png(std::span<const double> values, std::size_t nx,
                                       std::size_t ny);

struct PlotFiles {
  std::filesystem::path field;
  std::filesystem::path solution;
  std::filesystem::path loss;
};

/// field.csv, solution.svg, and loss.svg under `dir`.
PlotFiles export_plots(const EvalReport& report, const ErrorField& field,
                       std::span<const training::LossRecord> history,
                       const std::filesystem::path& dir);

}  // namespace spinn::eval
