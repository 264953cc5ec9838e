#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/cli/run.hpp"
#include "spinn/error.hpp"

using namespace spinn;
namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string problem, model, backbone;
  std::optional<std::size_t> iterations, points, log_every;
  std::optional<double> lr, epsilon;
  std::optional<std::uint64_t> seed;
  std::string config, out, test_set;
  bool force = false;
  bool quiet = false;
};

struct ReferenceArgs {
  std::string problem;
  std::size_t n = cli::kReferenceN;
  std::size_t m = cli::kReferenceM;
  double epsilon = 1e-3;
  std::string out;
  bool force = false;
};

struct EvaluateArgs {
  std::string run;
  std::string test_set, out;
  bool force = false;
};

struct CompareArgs {
  std::vector<std::string> runs;
  std::string csv;
  bool force = false;
};

training::TrainConfig build_config(const TrainArgs& a) {
  training::TrainConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw LookupError("cannot open config file " + a.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + a.config + " is not valid JSON: " + e.what());
    }
    cfg = training::config_from_json(j, cfg);
  }
  if (!a.problem.empty()) cfg.problem = a.problem;
  if (!a.model.empty()) cfg.model = a.model;
  if (!a.backbone.empty()) cfg.backbone = a.backbone;
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.epsilon) cfg.epsilon = *a.epsilon;
  if (a.seed) cfg.seed = *a.seed;
  if (a.log_every) cfg.log_every = *a.log_every;
  if (a.points) {
    const auto p = problems::make_problem(cfg.problem, cfg.epsilon);
    (p.input_dim == 1 ? cfg.sampling.interior_1d : cfg.sampling.interior_2d) = *a.points;
  }
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const auto cfg = build_config(a);
  const fs::path out = a.out.empty() ? cli::default_run_dir(cfg) : fs::path(a.out);
  const auto problem = problems::make_problem(cfg.problem, cfg.epsilon);
  const auto test = cli::resolve_test_set(problem, a.test_set.empty() ? std::nullopt : std::optional<fs::path>(a.test_set), true);
  cli::prepare_output_dir(out, a.force);

  const std::size_t every = std::max<std::size_t>(cfg.log_every, 1000);
  training::ProgressFn progress;
  if (!a.quiet) {
    progress = [&](const training::LossRecord& r) {
      if (r.iteration % every != 0 && r.iteration != cfg.iterations) return;
      std::fprintf(stderr, "[%s] iter %7zu  loss %.4e  (r %.3e, bc %.3e, ic %.3e)  %.1fs\n",
                   cfg.problem.c_str(), r.iteration, r.loss.total, r.loss.r, r.loss.bc, r.loss.ic,
                   r.seconds);
    };
  }
  const auto o = cli::train_run(cfg, out, test, progress);
  cli::write_manifest(out, "train", argv, training::to_json(cfg), cli::kRunFiles);

  std::printf("%s %s/%s  relative_l2 %.4e  wall %.1fs  iterations %zu\n  -> %s\n", cfg.problem.c_str(),
              cfg.model.c_str(), cfg.backbone.c_str(), o.report.relative_l2, o.report.wall_seconds,
              o.report.iterations, out.string().c_str());
  if (o.result.abort_reason) {
    std::fprintf(stderr, "training aborted: %s (last good parameters kept)\n", o.result.abort_reason->c_str());
    return 2;
  }
  return 0;
}

int run_reference(const ReferenceArgs& a) {
  const auto p = problems::make_problem(a.problem, a.epsilon);
  if (p.input_dim == 1) {
    throw ConfigError(a.problem + " is an ODE with a closed-form solution; its test set is analytic, "
                      "so no finite-difference reference is needed");
  }
  const fs::path dir = a.out.empty() ? cli::reference_dir() : fs::path(a.out);
  fs::create_directories(dir);
  const auto g = fdm::solve_reference(p, a.n, a.m);
  const auto path = cli::write_reference(g, p, dir, a.force);
  std::printf("%s  %zu nodes  sha256 %s\n", path.string().c_str(), g.node_count(),
              fdm::sha256_hex(path).c_str());
  return 0;
}

int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  const fs::path run = a.run;
  const auto ck = training::read_checkpoint(run / "checkpoint.json");
  const auto cfg = training::config_from_json(ck.meta.at("config"));
  const auto problem = problems::make_problem(cfg.problem, cfg.epsilon);
  const auto test = cli::resolve_test_set(problem, a.test_set.empty() ? std::nullopt : std::optional<fs::path>(a.test_set), false);
  eval::ErrorField field;
  auto report = cli::evaluate_run(run, test, &field);
  std::printf("%s %s/%s  relative_l2 %.4e  wall %.1fs\n", report.problem.c_str(), report.model.c_str(),
              report.backbone.c_str(), report.relative_l2, report.wall_seconds);
  if (!a.out.empty()) {
    const fs::path out = a.out;
    cli::prepare_output_dir(out, a.force);
    std::vector<training::LossRecord> history;
    if (fs::exists(run / "loss.csv")) history = training::read_loss_csv(run / "loss.csv");
    report.files = {"report.json", "field.csv", "solution.svg", "loss.svg"};
    eval::export_plots(report, field, history, out);
    eval::write_report(report, out / "report.json");
    cli::write_manifest(out, "evaluate", argv, report.config, report.files);
    std::printf("  -> %s\n", out.string().c_str());
  }
  return 0;
}

int run_compare(const CompareArgs& a) {
  std::vector<fs::path> dirs(a.runs.begin(), a.runs.end());
  const auto rows = cli::compare_runs(dirs);
  std::cout << "problem " << rows.front().report.problem << " (ratios relative to " << rows.front().run << ")\n";
  std::cout << cli::format_table(rows);
  if (!a.csv.empty()) {
    if (fs::exists(a.csv) && !a.force) throw ConfigError(a.csv + " exists; pass --force to overwrite");
    std::ofstream out(a.csv);
    out << cli::format_csv(rows);
    if (!out) throw ConfigError("cannot write " + a.csv);
  }
  return 0;
}

int run_list() {
  std::printf("%-6s %-4s %-10s %-10s %s\n", "name", "dim", "domain", "layer", "equation");
  for (const auto& name : problems::problem_names()) {
    const auto p = problems::make_problem(name, 1e-3);
    std::string layer;
    for (const auto& pr : p.priors) {
      if (!layer.empty()) layer += ",";
      layer += p.coord_names[pr.normal_dim] + "=" + (pr.position < 0.5 ? "0" : "1");
    }
    std::printf("%-6s %-4zu %-10s %-10s %s\n", name.c_str(), p.input_dim, problems::to_string(p.domain).c_str(),
                layer.c_str(), p.equation.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-layer PINN laboratory: PINN, GKPINN and ASPINN on singularly perturbed problems"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv + 1, argv + argc);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  train->add_option("problem", ta.problem, "problem name (see list-problems)");
  train->add_option("model", ta.model, "pinn | gkpinn | aspinn");
  train->add_option("backbone", ta.backbone, "mlp | kan");
  train->add_option("--iterations", ta.iterations, "Adam iterations");
  train->add_option("--lr", ta.lr, "learning rate");
  train->add_option("--seed", ta.seed, "random seed");
  train->add_option("--epsilon", ta.epsilon, "perturbation parameter");
  train->add_option("--points", ta.points, "interior collocation points");
  train->add_option("--log-every", ta.log_every, "loss logging interval");
  train->add_option("--config", ta.config, "JSON config; flags override its values");
  train->add_option("--out", ta.out, "run directory (default $SPINN_OUT/<problem>_<model>_<backbone>_s<seed>)");
  train->add_option("--test-set", ta.test_set, "frozen reference grid for PDE problems");
  train->add_flag("--force", ta.force, "overwrite a non-empty run directory");
  train->add_flag("--quiet", ta.quiet, "no progress output");

  ReferenceArgs ra;
  auto* reference = app.add_subcommand("reference", "generate a finite-difference test set");
  reference->add_option("problem", ra.problem, "PDE problem name")->required();
  reference->add_option("--n", ra.n, "spatial intervals (even)");
  reference->add_option("--m", ra.m, "time steps for time-dependent problems");
  reference->add_option("--epsilon", ra.epsilon, "perturbation parameter");
  reference->add_option("--out", ra.out, "directory (default $SPINN_OUT/reference)");
  reference->add_flag("--force", ra.force, "replace a differing grid");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "re-evaluate a run's checkpoint");
  evaluate->add_option("run", ea.run, "run directory")->required();
  evaluate->add_option("--test-set", ea.test_set, "reference grid for PDE problems");
  evaluate->add_option("--out", ea.out, "write report and plots here");
  evaluate->add_flag("--force", ea.force, "overwrite a non-empty output directory");

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "tabulate completed runs on one problem");
  compare->add_option("runs", ca.runs, "run directories")->required()->expected(2, -1);
  compare->add_option("--csv", ca.csv, "also write the table as CSV");
  compare->add_flag("--force", ca.force, "overwrite an existing CSV");

  auto* list = app.add_subcommand("list-problems", "show the problem registry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return run_train(ta, args);
    if (*reference) return run_reference(ra);
    if (*evaluate) return run_evaluate(ea, args);
    if (*compare) return run_compare(ca);
    if (*list) return run_list();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  }
  return 1;
}
