#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/eval/eval.hpp"
#include "spinn/fdm/fdm.hpp"
#include "spinn/problems/problem.hpp"
#include "spinn/training/training.hpp"

namespace spinn::cli {

namespace fs = std::filesystem;

inline constexpr std::size_t kReferenceN = 1024;
inline constexpr std::size_t kReferenceM = 512;

/// $SPINN_OUT, or ./spinn_out.
fs::path output_root();
fs::path default_run_dir(const training::TrainConfig& cfg);
fs::path reference_dir();

/// Creates `dir`. An existing non-empty directory is refused unless `force`,
/// in which case its contents are removed.
void prepare_output_dir(const fs::path& dir, bool force);

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::json config;
  std::vector<ManifestEntry> files;
};

/// Checksums `files` (relative names under dir) and writes manifest.json
/// atomically. Called last; its presence marks a completed run.
RunManifest write_manifest(const fs::path& dir, const std::string& command,
                           const std::vector<std::string>& args, const nlohmann::json& config,
                           const std::vector<std::string>& files);
/// Throws LookupError naming the directory when the run is incomplete.
RunManifest read_manifest(const fs::path& dir);

struct TestSet {
  fdm::GridSolution grid;
  std::string source;  // "analytic" or the grid path
};

/// Analytic nodes for ODEs. PDEs read `path` (default: the reference
/// directory); a missing grid is generated there when `generate` is set and
/// raises LookupError otherwise.
TestSet resolve_test_set(const problems::ProblemSpec& p, const std::optional<fs::path>& path,
                         bool generate);

/// Writes a frozen grid named after its parameters into `dir`. Returns the
/// path. Rewriting identical content is a no-op; differing content needs
/// `force`.
fs::path write_reference(const fdm::GridSolution& g, const problems::ProblemSpec& p,
                         const fs::path& dir, bool force);

inline const std::vector<std::string> kRunFiles{"checkpoint.json", "loss.csv",     "report.json",
                                                "field.csv",       "solution.svg", "loss.svg"};

struct RunOutcome {
  eval::EvalReport report;
  training::TrainResult result;
};

/// Trains, evaluates on `test`, and writes the six run files into `out`
/// (which must exist). The manifest is left to the caller.
RunOutcome train_run(const training::TrainConfig& cfg, const fs::path& out, const TestSet& test,
                     const training::ProgressFn& progress = {});

/// Re-evaluates a completed run's checkpoint.
eval::EvalReport evaluate_run(const fs::path& run_dir, const TestSet& test, eval::ErrorField* field);

struct ComparisonRow {
  std::string run;
  eval::EvalReport report;
  double l2_ratio = 1.0;    // relative to the first row
  double time_ratio = 1.0;  // relative to the first row
};

/// Needs at least two completed runs on the same problem.
std::vector<ComparisonRow> compare_runs(const std::vector<fs::path>& dirs);
std::string format_table(const std::vector<ComparisonRow>& rows);
std::string format_csv(const std::vector<ComparisonRow>& rows);

}  // namespace spinn::cli
