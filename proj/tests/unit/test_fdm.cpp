#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "json.hpp"
#include "spinn/error.hpp"
#include "spinn/fdm/fdm.hpp"
#include "spinn/problems/problem.hpp"
#include "spinn/random.hpp"

using namespace spinn;
using namespace spinn::fdm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

double max_error_ex1(std::size_t n, double eps) {
  const auto p = problems::make_problem("ex1", eps);
  const auto g = solve_steady_1d(p, n);
  double err = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    err = std::max(err, std::abs(g.at(i) - problems::exact_ex1(g.x[i], eps)));
  }
  return err;
}

// Scaled residual of the upwind / central scheme, rebuilt from the operator
// coefficients independently of the solver.
double scaled_residual(const problems::ProblemSpec& p, const GridSolution& g) {
  const auto& op = p.op;
  const std::vector<const std::vector<double>*> axes{&g.x, &g.y};
  double worst = 0.0;
  double scale = 0.0;
  const std::size_t nx = g.x.size();
  const std::size_t ny = g.dims() == 1 ? 1 : g.y.size();
  for (std::size_t j = (ny > 1 ? 1 : 0); j < (ny > 1 ? ny - 1 : 1); ++j) {
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      double r = op.reaction * g.at(i, j);
      double mag = std::abs(r);
      for (std::size_t d = 0; d < g.dims(); ++d) {
        const auto& c = *axes[d];
        const std::size_t k = d == 0 ? i : j;
        auto u = [&](int off) {
          return d == 0 ? g.at(i + off, j) : g.at(i, j + off);
        };
        const double hl = c[k] - c[k - 1];
        const double hr = c[k + 1] - c[k];
        const double d2 = 2.0 / (hl + hr) * ((u(1) - u(0)) / hr - (u(0) - u(-1)) / hl);
        const bool backward = op.first[d] * -op.second[d] > 0.0;
        const double d1 = backward ? (u(0) - u(-1)) / hl : (u(1) - u(0)) / hr;
        r += op.second[d] * d2 + op.first[d] * d1;
        mag += std::abs(op.second[d] * d2) + std::abs(op.first[d] * d1);
      }
      std::vector<double> pt{g.x[i]};
      if (g.dims() == 2) pt.push_back(g.y[j]);
      const double f = op.forcing_at(pt);
      worst = std::max(worst, std::abs(r - f));
      scale = std::max(scale, mag + std::abs(f));
    }
  }
  return worst / std::max(scale, 1.0);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double grid_distance(const GridSolution& coarse, const GridSolution& fine) {
  double d = 0.0;
  for (std::size_t j = 0; j < std::max<std::size_t>(coarse.y.size(), 1); ++j) {
    for (std::size_t i = 0; i < coarse.x.size(); ++i) {
      std::vector<double> pt{coarse.x[i]};
      if (coarse.dims() == 2) pt.push_back(coarse.y[j]);
      d = std::max(d, std::abs(coarse.at(i, j) - fine.interpolate(pt)));
    }
  }
  return d;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("spinn_fdm_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(ShishkinMesh, TransitionAndNodes) {
  const auto m = shishkin_mesh(64, 1e-3, 1.0, true);
  EXPECT_DOUBLE_EQ(m.tau, 2e-3 * std::log(64.0));
  ASSERT_EQ(m.nodes.size(), 65u);
  EXPECT_EQ(m.nodes.front(), 0.0);
  EXPECT_EQ(m.nodes.back(), 1.0);
  EXPECT_NEAR(m.nodes[32], 1.0 - m.tau, 1e-15);
  for (std::size_t i = 1; i < m.nodes.size(); ++i) EXPECT_LT(m.nodes[i - 1], m.nodes[i]);
  EXPECT_NEAR(m.nodes[64] - m.nodes[63], m.tau / 32.0, 1e-15);
}

TEST(ShishkinMesh, MirrorsForLeftLayer) {
  const auto r = shishkin_mesh(16, 1e-2, 2.0, true);
  const auto l = shishkin_mesh(16, 1e-2, 2.0, false);
  for (std::size_t i = 0; i <= 16; ++i) EXPECT_NEAR(l.nodes[i], 1.0 - r.nodes[16 - i], 1e-15);
}

TEST(ShishkinMesh, TauCappedAtHalf) {
  const auto m = shishkin_mesh(8, 0.5, 1.0, true);
  EXPECT_EQ(m.tau, 0.5);
  for (std::size_t i = 0; i <= 8; ++i) EXPECT_NEAR(m.nodes[i], i / 8.0, 1e-15);
}

TEST(ShishkinMesh, RejectsBadSizes) {
  EXPECT_THROW(shishkin_mesh(7, 1e-3, 1.0, true), ConfigError);
  EXPECT_THROW(shishkin_mesh(0, 1e-3, 1.0, true), ConfigError);
  EXPECT_THROW(shishkin_mesh(8, 0.0, 1.0, true), ConfigError);
}

TEST(Tridiagonal, MatchesDenseElimination) {
  Rng rng(5);
  const std::size_t n = 12;
  std::vector<double> a(n), b(n), c(n), d(n);
  std::vector<std::vector<double>> dense(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = i ? rng.uniform(-1, 1) : 0.0;
    c[i] = i + 1 < n ? rng.uniform(-1, 1) : 0.0;
    b[i] = 3.0 + rng.uniform();
    d[i] = rng.uniform(-1, 1);
    if (i) dense[i][i - 1] = a[i];
    dense[i][i] = b[i];
    if (i + 1 < n) dense[i][i + 1] = c[i];
    dense[i][n] = d[i];
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = dense[r][k] / dense[k][k];
      for (std::size_t q = k; q <= n; ++q) dense[r][q] -= f * dense[k][q];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = dense[k][n];
    for (std::size_t q = k + 1; q < n; ++q) s -= dense[k][q] * x[q];
    x[k] = s / dense[k][k];
  }
  solve_tridiagonal(a, b, c, d);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(d[i], x[i], 1e-13);
}

TEST(Tridiagonal, SingularPivotThrows) {
  std::vector<double> a{0, 1}, b{0, 1}, c{1, 0}, d{1, 1};
  EXPECT_THROW(solve_tridiagonal(a, b, c, d), NumericError);
}

TEST(Steady1d, Ex1AccurateAtFineMesh) {
  EXPECT_LT(max_error_ex1(1024, 0.1), 1e-2);
  EXPECT_LT(max_error_ex1(1024, 1e-3), 1e-2);
}

TEST(Steady1d, Ex1UniformConvergence) {
  for (double eps : {0.1, 1e-3}) {
    double prev = max_error_ex1(64, eps);
    for (std::size_t n : {128, 256, 512, 1024}) {
      const double e = max_error_ex1(n, eps);
      EXPECT_GE(prev / e, 1.5) << "eps " << eps << " n " << n;
      prev = e;
    }
  }
}

TEST(Steady1d, Ex2AndIntroAgainstExact) {
  for (const char* name : {"ex2", "intro"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g = solve_steady_1d(p, 1024);
    double err = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) err = std::max(err, std::abs(g.at(i) - p.exact(g.x[i])));
    EXPECT_LT(err, 2e-2) << name;
  }
}

TEST(Steady1d, BoundaryNodesCarryData) {
  for (const char* name : {"ex1", "ex2", "intro"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g = solve_steady_1d(p, 64);
    EXPECT_EQ(g.values.front(), p.boundary_value({0, 0.0}, std::vector<double>{0.0})) << name;
    EXPECT_EQ(g.values.back(), p.boundary_value({0, 1.0}, std::vector<double>{1.0})) << name;
  }
}

TEST(Steady1d, LayerRefinedOnCorrectSide) {
  const auto g1 = solve_steady_1d(problems::make_problem("ex1", 1e-3), 64);
  EXPECT_LT(g1.x[64] - g1.x[63], g1.x[1] - g1.x[0]);
  const auto g2 = solve_steady_1d(problems::make_problem("ex2", 1e-3), 64);
  EXPECT_GT(g2.x[64] - g2.x[63], g2.x[1] - g2.x[0]);
}

TEST(Steady1d, DiscreteResidualVanishes) {
  for (const char* name : {"ex1", "ex2", "intro"}) {
    const auto p = problems::make_problem(name, 1e-3);
    EXPECT_LT(scaled_residual(p, solve_steady_1d(p, 256)), 1e-12) << name;
  }
}

TEST(Steady1d, RejectsOtherProblems) {
  EXPECT_THROW(solve_steady_1d(problems::make_problem("ex3", 1e-3), 64), ConfigError);
}

TEST(Steady2d, Ex3BoundaryData) {
  const auto p = problems::make_problem("ex3", 1e-3);
  const auto g = solve_steady_2d(p, 64);
  ASSERT_EQ(g.node_count(), 65u * 65u);
  for (std::size_t j = 0; j <= 64; ++j) {
    EXPECT_EQ(g.at(64, j), 2.0 * std::sin(kPi * g.y[j]));
    EXPECT_EQ(g.at(0, j), std::sin(kPi * g.y[j]));
  }
  for (std::size_t i = 1; i < 64; ++i) {
    EXPECT_EQ(g.at(i, 0), 0.0);
    EXPECT_EQ(g.at(i, 64), 0.0);
  }
}

TEST(Steady2d, Ex4BoundaryDataAndMesh) {
  const auto p = problems::make_problem("ex4", 1e-3);
  const auto g = solve_steady_2d(p, 64);
  for (std::size_t i = 0; i <= 64; ++i) {
    EXPECT_EQ(g.at(i, 0), 2.0 * std::sin(kPi * g.x[i]));
    EXPECT_EQ(g.at(i, 64), std::sin(kPi * g.x[i]));
  }
  EXPECT_NEAR(g.x[1] - g.x[0], 1.0 / 64.0, 1e-15);
  EXPECT_LT(g.y[1] - g.y[0], g.y[64] - g.y[63]);
}

TEST(Steady2d, DiscreteResidualVanishes) {
  for (const char* name : {"ex3", "ex4"}) {
    const auto p = problems::make_problem(name, 1e-3);
    EXPECT_LT(scaled_residual(p, solve_steady_2d(p, 128)), 1e-10) << name;
  }
}

TEST(Steady2d, SelfConvergence) {
  for (const char* name : {"ex3", "ex4"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto coarse = solve_steady_2d(p, 64);
    const auto fine = solve_steady_2d(p, 128);
    EXPECT_LT(grid_distance(coarse, fine), 5e-2) << name;
  }
}

TEST(Steady2d, SeparableCaseMatchesOneDimensionalSolve) {
  // Ex3 with pure sin(pi y) data: each column is sin(pi y) times the
  // solution of a 1D problem with reaction eps pi^2 on the same mesh.
  const double eps = 1e-2;
  const auto p = problems::make_problem("ex3", eps);
  const auto g = solve_steady_2d(p, 64);
  const std::size_t n = 64;
  const double k = 1.0 / n;
  const double lambda = 4.0 / (k * k) * std::pow(std::sin(kPi / (2.0 * n)), 2);
  std::vector<double> a(n - 1), b(n - 1), c(n - 1), r(n - 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double hl = g.x[i] - g.x[i - 1];
    const double hr = g.x[i + 1] - g.x[i];
    const double hb = 0.5 * (hl + hr);
    a[i - 1] = i > 1 ? -eps / (hl * hb) - 1.0 / hl : 0.0;
    c[i - 1] = i + 1 < n ? -eps / (hr * hb) : 0.0;
    b[i - 1] = eps / (hl * hb) + eps / (hr * hb) + 1.0 / hl + eps * lambda;
  }
  r.front() += eps / ((g.x[1] - g.x[0]) * 0.5 * (g.x[2] - g.x[0])) + 1.0 / (g.x[1] - g.x[0]);
  const double hr = g.x[n] - g.x[n - 1];
  r.back() += 2.0 * eps / (hr * 0.5 * (g.x[n] - g.x[n - 2]));
  solve_tridiagonal(a, b, c, r);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      EXPECT_NEAR(g.at(i, j), r[i - 1] * std::sin(kPi * g.y[j]), 1e-12);
    }
  }
}

TEST(Steady2d, RejectsOtherProblems) {
  EXPECT_THROW(solve_steady_2d(problems::make_problem("ex5", 1e-3), 64), ConfigError);
  EXPECT_THROW(solve_steady_2d(problems::make_problem("ex1", 1e-3), 64), ConfigError);
}

TEST(Parabolic, InitialSliceAndBoundaries) {
  for (const char* name : {"ex5", "ex6"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g = solve_parabolic(p, 64, 32);
    ASSERT_EQ(g.node_count(), 65u * 33u);
    EXPECT_EQ(g.y.front(), 0.0);
    EXPECT_EQ(g.y.back(), 1.0);
    for (std::size_t i = 1; i < 64; ++i) {
      EXPECT_EQ(g.at(i, 0), p.initial->value(std::vector<double>{g.x[i], 0.0})) << name;
    }
    for (std::size_t j = 0; j <= 32; ++j) {
      EXPECT_EQ(g.at(0, j), 0.0) << name;
      EXPECT_EQ(g.at(64, j), 1.0) << name;
    }
  }
}

TEST(Parabolic, TemporalConvergence) {
  for (const char* name : {"ex5", "ex6"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g1 = solve_parabolic(p, 128, 32);
    const auto g2 = solve_parabolic(p, 128, 64);
    const auto g3 = solve_parabolic(p, 128, 128);
    auto diff = [](const GridSolution& a, const GridSolution& b) {
      const std::size_t stride = (b.y.size() - 1) / (a.y.size() - 1);
      double d = 0.0;
      for (std::size_t j = 0; j < a.y.size(); ++j) {
        for (std::size_t i = 0; i < a.x.size(); ++i) d = std::max(d, std::abs(a.at(i, j) - b.at(i, j * stride)));
      }
      return d;
    };
    const double d12 = diff(g1, g2);
    const double d23 = diff(g2, g3);
    EXPECT_GT(d12, 0.0) << name;
    EXPECT_GE(d12 / d23, 1.5) << name;
  }
}

TEST(Parabolic, SpatialSelfConvergence) {
  for (const char* name : {"ex5", "ex6"}) {
    const auto p = problems::make_problem(name, 1e-3);
    std::vector<double> d;
    for (std::size_t n = 64; n <= 512; n *= 2) {
      d.push_back(grid_distance(solve_parabolic(p, n, 256), solve_parabolic(p, 2 * n, 256)));
    }
    for (std::size_t k = 1; k < d.size(); ++k) EXPECT_GE(d[k - 1] / d[k], 1.5) << name << " " << k;
    EXPECT_LT(d.back(), 0.1) << name;
  }
}

TEST(MaximumPrinciple, HoldsWhereReactionIsNonNegative) {
  for (const char* name : {"ex3", "ex4", "ex6"}) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g = solve_reference(p, 128, 64);
    double bound = 0.0;
    const std::size_t nx = g.x.size();
    const std::size_t ny = g.y.size();
    for (std::size_t i = 0; i < nx; ++i) bound = std::max({bound, std::abs(g.at(i, 0)), std::abs(g.at(i, ny - 1))});
    for (std::size_t j = 0; j < ny; ++j) bound = std::max({bound, std::abs(g.at(0, j)), std::abs(g.at(nx - 1, j))});
    EXPECT_LE(max_abs(g.values), bound * (1.0 + 1e-12)) << name;
  }
}

TEST(Reference, DispatchesAndIsFinite) {
  for (const auto& name : problems::problem_names()) {
    const auto p = problems::make_problem(name, 1e-3);
    const auto g = solve_reference(p, 32, 16);
    EXPECT_EQ(g.dims(), p.input_dim) << name;
    for (double v : g.values) ASSERT_TRUE(std::isfinite(v)) << name;
    EXPECT_EQ(g.coordinates().size(), p.input_dim);
    EXPECT_EQ(g.coordinates()[0].size(), g.node_count());
  }
}

TEST(Reference, BitStableRegeneration) {
  const auto p = problems::make_problem("ex4", 1e-3);
  const auto a = solve_reference(p, 64, 0);
  const auto b = solve_reference(p, 64, 0);
  EXPECT_EQ(a.values, b.values);
}

TEST(Interpolate, ExactOnNodesAndLinearBetween) {
  const auto g = solve_parabolic(problems::make_problem("ex6", 1e-2), 16, 8);
  for (std::size_t j = 0; j < g.y.size(); j += 3) {
    for (std::size_t i = 0; i < g.x.size(); i += 5) {
      EXPECT_EQ(g.interpolate(std::vector<double>{g.x[i], g.y[j]}), g.at(i, j));
    }
  }
  const double xm = 0.5 * (g.x[3] + g.x[4]);
  const double ym = 0.5 * (g.y[2] + g.y[3]);
  const double want = 0.25 * (g.at(3, 2) + g.at(4, 2) + g.at(3, 3) + g.at(4, 3));
  EXPECT_NEAR(g.interpolate(std::vector<double>{xm, ym}), want, 1e-14);
}

TEST(Persistence, RoundTripAndChecksum) {
  const auto dir = temp_dir("roundtrip");
  const auto p = problems::make_problem("ex3", 1e-3);
  const auto g = solve_steady_2d(p, 16);
  const auto csv = dir / "ref.csv";
  const std::string sum = write_grid(g, csv);
  EXPECT_EQ(sum.size(), 64u);
  EXPECT_EQ(sum, sha256_hex(csv));

  std::ifstream meta_in(sidecar_path(csv));
  const auto meta = nlohmann::json::parse(meta_in);
  EXPECT_EQ(meta["problem"], "ex3");
  EXPECT_EQ(meta["n"], 16);
  EXPECT_EQ(meta["rows"], 17 * 17);
  EXPECT_EQ(meta["checksum"], "sha256:" + sum);

  std::ifstream text(csv);
  std::string header;
  std::getline(text, header);
  EXPECT_EQ(header, "x,y,u");

  const auto back = read_grid(csv);
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(back.x, g.x);
  EXPECT_EQ(back.y, g.y);
  EXPECT_EQ(back.problem, g.problem);
  EXPECT_EQ(back.epsilon, g.epsilon);
  EXPECT_EQ(back.tau, g.tau);

  EXPECT_EQ(write_grid(g, dir / "again.csv"), sum);
}

TEST(Persistence, OneDimensionalHeader) {
  const auto dir = temp_dir("oned");
  const auto g = solve_steady_1d(problems::make_problem("ex1", 0.1), 8);
  write_grid(g, dir / "g.csv");
  std::ifstream text(dir / "g.csv");
  std::string header;
  std::getline(text, header);
  EXPECT_EQ(header, "x,u");
  EXPECT_EQ(read_grid(dir / "g.csv").values, g.values);
}

TEST(Persistence, TamperedFileRejected) {
  const auto dir = temp_dir("tamper");
  const auto g = solve_steady_1d(problems::make_problem("ex1", 0.1), 8);
  const auto csv = dir / "g.csv";
  write_grid(g, csv);
  std::ofstream(csv, std::ios::app) << "0,0\n";
  EXPECT_THROW(read_grid(csv), NumericError);
  fs::remove(sidecar_path(csv));
  EXPECT_THROW(read_grid(csv), LookupError);
}
