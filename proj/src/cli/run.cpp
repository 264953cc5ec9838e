#include "spinn/cli/run.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spinn/error.hpp"

namespace spinn::cli {

fs::path output_root() {
  const char* env = std::getenv("SPINN_OUT");
  return env && *env ? fs::path(env) : fs::path("spinn_out");
}

fs::path default_run_dir(const training::TrainConfig& cfg) {
  return output_root() / (cfg.problem + "_" + cfg.model + "_" + cfg.backbone + "_s" + std::to_string(cfg.seed));
}

fs::path reference_dir() { return output_root() / "reference"; }

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw ConfigError(dir.string() + " exists and is not a directory");
  }
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError(dir.string() + " is not empty; pass --force to overwrite");
    for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
  }
  fs::create_directories(dir);
}

RunManifest write_manifest(const fs::path& dir, const std::string& command,
                           const std::vector<std::string>& args, const nlohmann::json& config,
                           const std::vector<std::string>& files) {
  RunManifest m{command, args, config, {}};
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& f : files) {
    const auto path = dir / f;
    if (!fs::exists(path)) throw LookupError("expected output " + path.string() + " is missing");
    m.files.push_back({f, fdm::sha256_hex(path)});
    entries.push_back({{"path", f}, {"sha256", m.files.back().sha256}, {"bytes", fs::file_size(path)}});
  }
  const nlohmann::json j{{"command", command}, {"args", args}, {"config", config}, {"files", entries}};
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
    if (!out) throw ConfigError("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / "manifest.json");
  return m;
}

RunManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw LookupError(dir.string() + " has no manifest.json; it is not a completed run directory");
  }
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.command = j.at("command");
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config = j.at("config");
    for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("sha256")});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return m;
}

namespace {

std::size_t reference_m(const problems::ProblemSpec& p) {
  return p.time_dependent() ? kReferenceM : kReferenceN;
}

}  // namespace

TestSet resolve_test_set(const problems::ProblemSpec& p, const std::optional<fs::path>& path,
                         bool generate) {
  if (p.input_dim == 1 && p.has_exact()) return {eval::analytic_test_set(p, kReferenceN), "analytic"};
  const fs::path file = path ? *path : reference_dir() / eval::test_set_name(p, kReferenceN, reference_m(p));
  if (!fs::exists(file) && generate && !path) {
    fs::create_directories(file.parent_path());
    write_reference(fdm::solve_reference(p, kReferenceN, kReferenceM), p, file.parent_path(), false);
  }
  return {eval::load_test_set(file, p), file.string()};
}

fs::path write_reference(const fdm::GridSolution& g, const problems::ProblemSpec& p,
                         const fs::path& dir, bool force) {
  const fs::path target = dir / eval::test_set_name(p, g.n, g.m);
  const fs::path tmp = dir / (target.stem().string() + ".tmp.csv");
  const std::string sum = fdm::write_grid(g, tmp);
  if (fs::exists(target)) {
    if (fdm::sha256_hex(target) == sum && fs::exists(fdm::sidecar_path(target))) {
      fs::remove(tmp);
      fs::remove(fdm::sidecar_path(tmp));
      return target;
    }
    if (!force) {
      fs::remove(tmp);
      fs::remove(fdm::sidecar_path(tmp));
      throw ConfigError(target.string() + " exists with different content; pass --force to overwrite");
    }
  }
  fs::rename(fdm::sidecar_path(tmp), fdm::sidecar_path(target));
  fs::rename(tmp, target);
  return target;
}

namespace {

eval::EvalReport base_report(const training::TrainConfig& cfg) {
  eval::EvalReport r;
  r.problem = cfg.problem;
  r.model = cfg.model;
  r.backbone = cfg.backbone;
  r.epsilon = cfg.epsilon;
  r.seed = cfg.seed;
  r.config = training::to_json(cfg);
  r.error_field = "field.csv";
  return r;
}

}  // namespace

RunOutcome train_run(const training::TrainConfig& cfg, const fs::path& out, const TestSet& test,
                     const training::ProgressFn& progress) {
  const auto problem = problems::make_problem(cfg.problem, cfg.epsilon);
  const auto model = training::make_model(cfg, problem);
  RunOutcome o;
  o.result = training::train(cfg, progress);

  nlohmann::json meta{{"config", training::to_json(cfg)}, {"iterations", o.result.iterations}};
  if (o.result.abort_reason) meta["abort_reason"] = *o.result.abort_reason;
  training::write_checkpoint(out / "checkpoint.json", {o.result.tensors, o.result.params, meta});
  training::write_loss_csv(out / "loss.csv", o.result.history);

  const auto field = eval::evaluate(model, o.result.params, test.grid);
  o.report = base_report(cfg);
  o.report.relative_l2 = field.relative_l2();
  o.report.wall_seconds = o.result.wall_seconds;
  o.report.iterations = o.result.iterations;
  o.report.test_set = test.source;
  o.report.abort_reason = o.result.abort_reason.value_or("");
  o.report.files = kRunFiles;
  eval::export_plots(o.report, field, o.result.history, out);
  eval::write_report(o.report, out / "report.json");
  return o;
}

eval::EvalReport evaluate_run(const fs::path& run_dir, const TestSet& test, eval::ErrorField* field) {
  const auto ck = training::read_checkpoint(run_dir / "checkpoint.json");
  const auto cfg = training::config_from_json(ck.meta.at("config"));
  const auto problem = problems::make_problem(cfg.problem, cfg.epsilon);
  const auto model = training::make_model(cfg, problem);
  if (ck.tensors != model.tensor_table()) {
    throw ConfigError("checkpoint in " + run_dir.string() + " does not match its configuration");
  }
  auto f = eval::evaluate(model, ck.params, test.grid);
  auto r = base_report(cfg);
  r.relative_l2 = f.relative_l2();
  r.iterations = ck.meta.value("iterations", std::size_t{0});
  r.abort_reason = ck.meta.value("abort_reason", "");
  r.test_set = test.source;
  const auto loss = run_dir / "loss.csv";
  if (fs::exists(loss)) {
    const auto history = training::read_loss_csv(loss);
    if (!history.empty()) r.wall_seconds = history.back().seconds;
  }
  if (field) *field = std::move(f);
  return r;
}

std::vector<ComparisonRow> compare_runs(const std::vector<fs::path>& dirs) {
  if (dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  std::vector<ComparisonRow> rows;
  for (const auto& d : dirs) {
    if (!fs::exists(d / "report.json")) {
      throw LookupError(d.string() + " has no report.json; run `spinn train` into it or `spinn evaluate " +
                        d.string() + " --out <dir>` first");
    }
    ComparisonRow row;
    row.run = d.filename().empty() ? d.parent_path().filename().string() : d.filename().string();
    row.report = eval::read_report(d / "report.json");
    read_manifest(d);
    rows.push_back(std::move(row));
  }
  for (const auto& r : rows) {
    if (r.report.problem != rows.front().report.problem || r.report.epsilon != rows.front().report.epsilon) {
      throw ConfigError("runs solve different problems: " + rows.front().run + " (" +
                        rows.front().report.problem + ") vs " + r.run + " (" + r.report.problem + ")");
    }
  }
  const auto& base = rows.front().report;
  for (auto& r : rows) {
    r.l2_ratio = base.relative_l2 > 0.0 ? r.report.relative_l2 / base.relative_l2 : NAN;
    r.time_ratio = base.wall_seconds > 0.0 ? r.report.wall_seconds / base.wall_seconds : NAN;
  }
  return rows;
}

std::string format_table(const std::vector<ComparisonRow>& rows) {
  std::size_t w = 3;
  for (const auto& r : rows) w = std::max(w, r.run.size());
  std::ostringstream s;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-*s  %-7s  %-8s  %12s  %10s  %8s  %10s\n", static_cast<int>(w), "run",
                "model", "backbone", "relative_l2", "wall_s", "l2_ratio", "time_ratio");
  s << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-7s  %-8s  %12.4e  %10.2f  %8.3f  %10.3f\n",
                  static_cast<int>(w), r.run.c_str(), r.report.model.c_str(), r.report.backbone.c_str(),
                  r.report.relative_l2, r.report.wall_seconds, r.l2_ratio, r.time_ratio);
    s << buf;
  }
  return s.str();
}

std::string format_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream s;
  s << "run,problem,model,backbone,seed,iterations,relative_l2,wall_seconds,l2_ratio,time_ratio\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%llu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.run.c_str(),
                  r.report.problem.c_str(), r.report.model.c_str(), r.report.backbone.c_str(),
                  static_cast<unsigned long long>(r.report.seed), r.report.iterations,
                  r.report.relative_l2, r.report.wall_seconds, r.l2_ratio, r.time_ratio);
    s << buf;
  }
  return s.str();
}

}  // namespace spinn::cli
