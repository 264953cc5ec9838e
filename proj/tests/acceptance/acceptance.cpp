// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when a blocking criterion fails.
//
//   acceptance [--only name,name,...] [--iterations N] [--json path]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/eval/eval.hpp"
#include "spinn/fdm/fdm.hpp"
#include "spinn/models/batched_model.hpp"
#include "spinn/problems/problem.hpp"
#include "spinn/random.hpp"
#include "spinn/sampling/sampling.hpp"
#include "spinn/training/training.hpp"

using namespace spinn;
using autodiff::DerivativeBundle;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-3;

struct Verdict {
  bool pass = false;
  std::string detail;
  bool blocking = true;
};

struct RunResult {
  double l2 = std::numeric_limits<double>::infinity();
  double wall = 0.0;
  std::string abort;
};

class Runner {
 public:
  explicit Runner(std::size_t iterations) : iterations_(iterations) {}

  std::size_t iterations() const { return iterations_; }

  const RunResult& run(const std::string& problem, const std::string& model, const std::string& backbone,
                       std::uint64_t seed, std::size_t points = 0) {
    const std::string key = problem + "/" + model + "/" + backbone + "/" + std::to_string(seed) + "/" +
                            std::to_string(points);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    training::TrainConfig cfg;
    cfg.problem = problem;
    cfg.model = model;
    cfg.backbone = backbone;
    cfg.seed = seed;
    cfg.epsilon = kEps;
    cfg.iterations = iterations_;
    cfg.log_every = 1000;
    const auto p = problems::make_problem(problem, kEps);
    if (points) (p.input_dim == 1 ? cfg.sampling.interior_1d : cfg.sampling.interior_2d) = points;

    std::fprintf(stderr, "  train %-5s %-6s %-3s seed %llu ...", problem.c_str(), model.c_str(), backbone.c_str(),
                 static_cast<unsigned long long>(seed));
    std::fflush(stderr);
    const auto r = training::train(cfg);
    const auto model_obj = training::make_model(cfg, p);
    RunResult out;
    out.wall = r.wall_seconds;
    out.abort = r.abort_reason.value_or("");
    out.l2 = eval::evaluate(model_obj, r.params, test_set(p)).relative_l2();
    std::fprintf(stderr, " rel_l2 %.4e  %.1fs%s\n", out.l2, out.wall, out.abort.empty() ? "" : "  (aborted)");
    return cache_.emplace(key, out).first->second;
  }

  nlohmann::json runs_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : cache_) j[k] = {{"relative_l2", v.l2}, {"wall_seconds", v.wall}, {"abort", v.abort}};
    return j;
  }

 private:
  const fdm::GridSolution& test_set(const problems::ProblemSpec& p) {
    if (auto it = tests_.find(p.name); it != tests_.end()) return it->second;
    auto g = p.input_dim == 1 ? eval::analytic_test_set(p, 1024) : fdm::solve_reference(p, 1024, 512);
    return tests_.emplace(p.name, std::move(g)).first->second;
  }

  std::size_t iterations_;
  std::map<std::string, RunResult> cache_;
  std::map<std::string, fdm::GridSolution> tests_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> seeds_l2(Runner& r, const std::string& problem, const std::string& model,
                             const std::string& backbone) {
  std::vector<double> v;
  for (std::uint64_t s = 0; s < 3; ++s) v.push_back(r.run(problem, model, backbone, s).l2);
  return v;
}

// --- training comparisons -------------------------------------------------------

Verdict pinn_failure(Runner& r) {
  const auto& pinn = r.run("ex1", "pinn", "mlp", 0);
  const auto& asp = r.run("ex1", "aspinn", "mlp", 0);
  const bool ok = pinn.l2 > 5e-2 && asp.l2 < 1e-2 && pinn.wall <= 1800.0 && asp.wall <= 1800.0;
  return {ok, fmt("ex1 PINN %.3e (> 5e-2), ASPINN(MLP) %.3e (< 1e-2); wall %.0fs / %.0fs (<= 1800s)", pinn.l2,
                  asp.l2, pinn.wall, asp.wall)};
}

Verdict aspinn_vs_gkpinn(Runner& r) {
  bool ok = true;
  std::string detail;
  for (const char* p : {"ex1", "ex2"}) {
    const double a = median(seeds_l2(r, p, "aspinn", "mlp"));
    const double g = median(seeds_l2(r, p, "gkpinn", "mlp"));
    ok = ok && a <= g;
    detail += fmt("%s median ASPINN %.3e vs GKPINN %.3e; ", p, a, g);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Verdict cost(Runner& r) {
  double ta = 0.0, tg = 0.0;
  for (const char* p : {"ex1", "ex2"}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      ta += r.run(p, "aspinn", "mlp", s).wall;
      tg += r.run(p, "gkpinn", "mlp", s).wall;
    }
  }
  return {ta <= 0.95 * tg,
          fmt("ASPINN %.0fs vs GKPINN %.0fs over ex1+ex2, 3 seeds, MLP, %zu iterations: ratio %.3f (<= 0.95)", ta,
              tg, r.iterations(), ta / tg)};
}

Verdict kan_vs_mlp(Runner& r) {
  const double k = median(seeds_l2(r, "ex1", "aspinn", "kan"));
  const double m = median(seeds_l2(r, "ex1", "aspinn", "mlp"));
  return {k < m, fmt("ex1 median ASPINN(KAN) %.3e < ASPINN(MLP) %.3e", k, m)};
}

Verdict time_varying_trend(Runner& r) {
  const double m = r.run("ex5", "aspinn", "mlp", 0, 2000).l2;
  const double k = r.run("ex5", "aspinn", "kan", 0, 2000).l2;
  return {m <= k, fmt("ex5 ASPINN(MLP) %.3e <= ASPINN(KAN) %.3e (trend, non-blocking)", m, k), false};
}

// --- deterministic checks -------------------------------------------------------

std::vector<training::TrainConfig> backbones(const std::string& problem, double eps) {
  std::vector<training::TrainConfig> v;
  for (const char* b : {"mlp", "kan"}) {
    training::TrainConfig c;
    c.problem = problem;
    c.epsilon = eps;
    c.backbone = b;
    v.push_back(c);
  }
  return v;
}

Verdict boundary_exactness(Runner&) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& name : problems::problem_names()) {
    const auto p = problems::make_problem(name, kEps);
    for (auto cfg : backbones(name, kEps)) {
      cfg.model = "aspinn";
      const auto model = training::make_model(cfg, p);
      const auto& prior = p.priors.at(0);
      Rng rng(101);
      networks::Matrix xs;
      xs.resize(p.input_dim, 100);
      std::vector<double> want(100);
      for (std::size_t i = 0; i < 100; ++i) {
        std::vector<double> x(p.input_dim);
        for (auto& v : x) v = rng.uniform();
        x[prior.normal_dim] = prior.position;
        for (std::size_t d = 0; d < x.size(); ++d) xs.row(d)[i] = x[d];
        want[i] = p.boundary_value({prior.normal_dim, prior.position}, x);
        const auto theta = model.init_params(1000 + i);
        worst = std::max(worst, std::abs(model.predict(theta.values(), x) - want[i]));
        ++checked;
      }
      const auto theta = model.init_params(7);
      const auto batch = models::predict_batch(model, theta.values(), xs.view());
      for (std::size_t i = 0; i < 100; ++i) worst = std::max(worst, std::abs(batch[i] - want[i]));
    }
  }
  return {worst < 1e-12, fmt("%zu layer-face points over 7 problems x {MLP, KAN}: max |u - g| = %.2e (< 1e-12)",
                             checked, worst)};
}

// Richardson-extrapolated central differences of the composed prediction.
std::pair<double, double> fd_derivatives(const models::Model& model, std::span<const double> theta,
                                         std::vector<double> x, std::size_t d) {
  const double x0 = x[d];
  auto f = [&](double s) {
    x[d] = s;
    return model.predict(theta, x);
  };
  auto d1 = [&](double h) { return (f(x0 + h) - f(x0 - h)) / (2 * h); };
  auto d2 = [&](double h) { return (f(x0 + h) - 2 * f(x0) + f(x0 - h)) / (h * h); };
  const double h1 = 1e-3, h2 = 5e-3;
  return {(4 * d1(h1 / 2) - d1(h1)) / 3, (4 * d2(h2 / 2) - d2(h2)) / 3};
}

Verdict autodiff_oracles(Runner&) {
  const double eps = 0.1;
  double worst_input = 0.0, worst_param = 0.0;
  std::size_t n_input = 0, n_param = 0;
  for (const auto& name : problems::problem_names()) {
    const auto p = problems::make_problem(name, eps);
    for (const char* kind : {"pinn", "gkpinn", "aspinn"}) {
      for (auto cfg : backbones(name, eps)) {
        cfg.model = kind;
        const auto model = training::make_model(cfg, p);
        const auto init = model.init_params(5);
        const std::vector<double> theta(init.values().begin(), init.values().end());

        Rng rng(23);
        for (int k = 0; k < 3; ++k) {
          std::vector<double> x(p.input_dim);
          for (auto& v : x) v = rng.uniform(0.1, 0.9);
          const DerivativeBundle b = model.derivatives(theta, x);
          for (std::size_t d = 0; d < x.size(); ++d) {
            const auto [fd1, fd2] = fd_derivatives(model, theta, x, d);
            worst_input = std::max(worst_input, std::abs(b.du[d] - fd1) / std::max(1.0, std::abs(fd1)));
            worst_input = std::max(worst_input, std::abs(b.d2u[d] - fd2) / std::max(1.0, std::abs(fd2)));
            n_input += 2;
          }
        }

        sampling::SampleConfig sc;
        sc.interior_1d = sc.interior_2d = 16;
        sc.boundary = 8;
        sc.initial = 8;
        const auto samples = sampling::sample_problem(p, 3, sc);
        training::LossEvaluator ev(model, p, samples, cfg.weights);
        ev.forward(theta);
        std::vector<double> grad(theta.size(), 0.0);
        ev.gradient(theta, {}, grad);
        auto loss_at = [&](std::vector<double> q) {
          ev.forward(q);
          return ev.loss().total;
        };
        for (int k = 0; k < 12; ++k) {
          const std::size_t i = rng.below(theta.size());
          const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
          auto plus = theta, minus = theta;
          plus[i] += h;
          minus[i] -= h;
          const double fd = (loss_at(plus) - loss_at(minus)) / (2 * h);
          worst_param = std::max(worst_param, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
          ++n_param;
        }
      }
    }
  }
  return {worst_input < 1e-6 && worst_param < 1e-5,
          fmt("%zu input derivatives max rel err %.2e (< 1e-6); %zu parameter gradients max rel err %.2e (< 1e-5)",
              n_input, worst_input, n_param, worst_param)};
}

DerivativeBundle bundle1(double u, double du, double d2u) { return {u, {du}, {d2u}}; }

DerivativeBundle ex1_exact(double x, double eps) {
  const double t = std::exp(-1.0 / eps);
  const double e = std::exp((x - 1.0) / eps);
  const double s = 1.0 - t;
  return bundle1(std::sin(kPi * x) + (e - t) / s, kPi * std::cos(kPi * x) + e / (eps * s),
                 -kPi * kPi * std::sin(kPi * x) + e / (eps * eps * s));
}

DerivativeBundle ex2_exact(double x, double eps) {
  const double d = std::exp(-1.0) - std::exp(-1.0 / eps);
  const double a = std::exp(-x);
  const double b = std::exp(-x / eps);
  return bundle1((a - b) / d, (-a + b / eps) / d, (a - b / (eps * eps)) / d);
}

DerivativeBundle intro_exact(double x, double eps) {
  const double r = (1.0 + eps) / eps;
  const double a = std::exp(-x);
  const double b = std::exp(r * (x - 1.0));
  return bundle1(a + b, -a + r * b, a + r * r * b);
}

Verdict exact_residuals(Runner&) {
  const double eps = 0.1;
  const std::pair<const char*, DerivativeBundle (*)(double, double)> cases[] = {
      {"ex1", ex1_exact}, {"ex2", ex2_exact}, {"intro", intro_exact}};
  std::string detail;
  bool ok = true;
  for (const auto& [name, exact] : cases) {
    const auto p = problems::make_problem(name, eps);
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.open_uniform();
      worst = std::max(worst, std::abs(p.residual(std::vector<double>{x}, exact(x, eps))));
    }
    ok = ok && worst < 1e-8;
    detail += fmt("%s %.1e, ", name, worst);
  }
  return {ok, "max |residual| at eps=0.1 over 1000 points: " + detail.substr(0, detail.size() - 2) + " (< 1e-8)"};
}

double grid_distance(const fdm::GridSolution& coarse, const fdm::GridSolution& fine) {
  double d = 0.0;
  for (std::size_t j = 0; j < std::max<std::size_t>(coarse.y.size(), 1); ++j) {
    for (std::size_t i = 0; i < coarse.x.size(); ++i) {
      std::vector<double> pt{coarse.x[i]};
      if (!coarse.y.empty()) pt.push_back(coarse.y[j]);
      d = std::max(d, std::abs(coarse.at(i, j) - fine.interpolate(pt)));
    }
  }
  return d;
}

Verdict fdm_convergence(Runner&) {
  bool ok = true;
  std::string detail = "ex1 error ratios";
  const auto p = problems::make_problem("ex1", kEps);
  double prev = 0.0;
  for (std::size_t n = 64; n <= 1024; n *= 2) {
    const auto g = fdm::solve_steady_1d(p, n);
    double err = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) err = std::max(err, std::abs(g.at(i) - p.exact(g.x[i])));
    if (n > 64) {
      ok = ok && prev / err >= 1.5;
      detail += fmt(" %.2f", prev / err);
    }
    prev = err;
  }
  detail += " (>= 1.5);";
  for (const char* name : {"ex3", "ex4"}) {
    const auto q = problems::make_problem(name, kEps);
    const double d = grid_distance(fdm::solve_steady_2d(q, 64), fdm::solve_steady_2d(q, 128));
    ok = ok && d < 5e-2;
    detail += fmt(" %s N64/128 %.1e (< 5e-2);", name, d);
  }
  for (const char* name : {"ex5", "ex6"}) {
    const auto q = problems::make_problem(name, kEps);
    const auto g1 = fdm::solve_parabolic(q, 128, 32);
    const auto g2 = fdm::solve_parabolic(q, 128, 64);
    const auto g3 = fdm::solve_parabolic(q, 128, 128);
    const double ratio = grid_distance(g1, g2) / grid_distance(g2, g3);
    ok = ok && ratio >= 1.5;
    detail += fmt(" %s M-doubling ratio %.2f (>= 1.5);", name, ratio);
  }
  detail.pop_back();
  return {ok, detail};
}

Verdict rba_bound(Runner&) {
  Rng rng(99);
  std::size_t violations = 0, updates = 0;
  for (int seq = 0; seq < 1000000; ++seq) {
    const std::size_t n = 1 + rng.below(4);
    training::RbaState s;
    for (std::size_t i = 0; i < n; ++i) s.alpha.push_back(rng.uniform());
    const double eta = seq % 3 == 0 ? rng.uniform() : (seq % 3 == 1 ? 1e-4 : 1.0);
    std::vector<double> e(n);
    for (int step = 0; step < 3; ++step) {
      for (auto& v : e) {
        const double kind = rng.uniform();
        v = kind < 0.1 ? 0.0 : rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-300, 300));
      }
      training::rba_update(s, e, eta);
      ++updates;
      for (double a : s.alpha) violations += !(a >= 0.0 && a <= 1.0);
    }
  }
  return {violations == 0, fmt("10^6 sequences, %zu updates: %zu alpha outside [0,1]", updates, violations)};
}

struct Criterion {
  const char* name;
  const char* title;
  std::function<Verdict(Runner&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string only, json_path;
  std::size_t iterations = 20000;
  app.add_option("--only", only, "comma-separated criterion names");
  app.add_option("--iterations", iterations, "Adam iterations for training comparisons");
  app.add_option("--json", json_path, "write verdicts and run results here");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"boundary", "ASPINN boundary exactness", boundary_exactness},
      {"autodiff", "autodiff oracle suite", autodiff_oracles},
      {"residual", "exact-solution residual oracles", exact_residuals},
      {"fdm", "FDM uniform and self-convergence", fdm_convergence},
      {"rba", "RBA multipliers stay in [0,1]", rba_bound},
      {"pinn-failure", "PINN failure vs ASPINN success on ex1", pinn_failure},
      {"accuracy", "ASPINN vs GKPINN accuracy", aspinn_vs_gkpinn},
      {"cost", "ASPINN vs GKPINN cost", cost},
      {"kan", "KAN vs MLP on ex1", kan_vs_mlp},
      {"ex5-trend", "MLP vs KAN on ex5", time_varying_trend},
  };
  std::set<std::string> wanted;
  std::stringstream ss(only);
  for (std::string t; std::getline(ss, t, ',');) {
    if (t.empty()) continue;
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return t == c.name; })) {
      std::fprintf(stderr, "unknown criterion %s\n", t.c_str());
      return 1;
    }
    wanted.insert(t);
  }

  Runner runner(iterations);
  nlohmann::json verdicts = nlohmann::json::array();
  int blocking_failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check(runner);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-12s %s: %s  [%.1fs]\n", v.pass ? "PASS" : "FAIL", c.name, c.title,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    blocking_failures += !v.pass && v.blocking;
    verdicts.push_back({{"name", c.name}, {"pass", v.pass}, {"blocking", v.blocking}, {"detail", v.detail}});
  }
  if (!json_path.empty()) {
    std::ofstream(json_path) << nlohmann::json{{"iterations", iterations}, {"criteria", verdicts},
                                               {"runs", runner.runs_json()}}
                                    .dump(2)
                             << "\n";
  }
  return blocking_failures == 0 ? 0 : 1;
}
