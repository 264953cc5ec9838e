#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "fd.hpp"
#include "spinn/autodiff/derivatives.hpp"
#include "spinn/autodiff/jet.hpp"
#include "spinn/autodiff/tape.hpp"
#include "spinn/error.hpp"
#include "spinn/networks/forward.hpp"
#include "spinn/networks/init.hpp"
#include "spinn/random.hpp"

using namespace spinn;
using namespace spinn::autodiff;
using spinn::test::rel_err;
using spinn::test::richardson;

namespace {

struct Primitive {
  std::string name;
  std::function<Var(const Var&)> f;
  std::function<double(double)> ref;
  double lo;
  double hi;
};

double tape_derivative(const std::function<Var(const Var&)>& f, double x) {
  Tape tape;
  const Var v = tape.variable(x);
  const Var y = f(v);
  return param_gradient(y, std::span<const Var>(&v, 1))[0];
}

// Independent extended-precision forward pass used as the finite-difference
// oracle; double-precision second differences at step 1e-4 lose ~8 digits.
long double mlp_extended(const networks::MlpConfig& cfg, const std::vector<double>& p,
                         std::vector<long double> a) {
  const auto slices = networks::mlp_slices(cfg);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const auto& s = slices[l];
    std::vector<long double> z(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      long double acc = p[s.b_offset + o];
      for (std::size_t i = 0; i < s.in; ++i) acc += p[s.w_offset + o * s.in + i] * a[i];
      if (l + 1 < slices.size()) {
        acc = cfg.activation == networks::Activation::kTanh ? std::tanh(acc)
                                                            : 1.0L / (1.0L + std::exp(-acc));
      }
      z[o] = acc;
    }
    a = std::move(z);
  }
  return a[0];
}

}  // namespace

TEST(Tape, QuadraticGradient) {
  Tape tape;
  const Var t = tape.variable(3.0);
  const Var loss = t * t;
  EXPECT_EQ(param_gradient(loss, std::span<const Var>(&t, 1))[0], 6.0);
}

TEST(Tape, DisconnectedParameterHasZeroGradient) {
  Tape tape;
  std::vector<Var> p{tape.variable(1.0), tape.variable(2.0)};
  const Var loss = p[0] * 5.0;
  const auto g = param_gradient(loss, p);
  EXPECT_EQ(g[0], 5.0);
  EXPECT_EQ(g[1], 0.0);

  const Var constant_loss = Var(2.0) * Var(3.0);
  for (double v : param_gradient(constant_loss, p)) EXPECT_EQ(v, 0.0);
}

TEST(Tape, NodesAreTopologicallyOrdered) {
  Tape tape;
  const Var x = tape.variable(0.5);
  const Var y = tanh(x) * x + exp(x);
  EXPECT_GT(y.index(), x.index());
  EXPECT_EQ(tape.size(), y.index() + 1);
}

TEST(Tape, ZeroConstantsAreFolded) {
  Tape tape;
  const Var x = tape.variable(1.5);
  const std::size_t before = tape.size();
  const Var y = x * Var(0.0);
  EXPECT_TRUE(y.is_constant());
  EXPECT_EQ(y.value(), 0.0);
  const Var z = Var(0.0) + x;
  EXPECT_EQ(z.index(), x.index());
  EXPECT_EQ(tape.size(), before);
}

TEST(Tape, NonFiniteResultNamesTheOperation) {
  Tape tape;
  const Var x = tape.variable(-1.0);
  try {
    (void)log(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
  const Var big = tape.variable(1000.0);
  try {
    (void)exp(big);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
  EXPECT_THROW((void)(x / Var(0.0)), NumericError);
}

TEST(Tape, MixingTapesIsRejected) {
  Tape a, b;
  const Var x = a.variable(1.0);
  const Var y = b.variable(2.0);
  EXPECT_THROW((void)(x + y), ConfigError);
}

TEST(Tape, PrimitivesMatchFiniteDifferences) {
  const std::vector<Primitive> prims{
      {"add", [](const Var& x) { return x + Var(0.7) + x; }, [](double x) { return 2 * x + 0.7; },
       -3, 3},
      {"sub", [](const Var& x) { return Var(0.2) - x * x; }, [](double x) { return 0.2 - x * x; },
       -3, 3},
      {"mul", [](const Var& x) { return x * x * x; }, [](double x) { return x * x * x; }, 0.2, 3},
      {"div", [](const Var& x) { return Var(1.0) / x; }, [](double x) { return 1.0 / x; }, 0.5, 3},
      {"neg", [](const Var& x) { return -x; }, [](double x) { return -x; }, -3, 3},
      {"tanh", [](const Var& x) { return tanh(x); }, [](double x) { return std::tanh(x); }, -3, 3},
      {"sigmoid", [](const Var& x) { return sigmoid(x); },
       [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, -6, 6},
      {"sin", [](const Var& x) { return sin(x); }, [](double x) { return std::sin(x); }, 0.1, 1.4},
      {"cos", [](const Var& x) { return cos(x); }, [](double x) { return std::cos(x); }, 0.1, 1.4},
      {"exp", [](const Var& x) { return exp(x); }, [](double x) { return std::exp(x); }, -5, 5},
      {"log", [](const Var& x) { return log(x); }, [](double x) { return std::log(x); }, 0.1, 5},
      {"acos", [](const Var& x) { return acos(x); }, [](double x) { return std::acos(x); }, -0.95,
       0.95},
      {"sqrt", [](const Var& x) { return sqrt(x); }, [](double x) { return std::sqrt(x); }, 0.1, 5},
      {"pow", [](const Var& x) { return pow(x, 2.5); }, [](double x) { return std::pow(x, 2.5); },
       0.1, 3},
  };
  Rng rng(11);
  for (const Primitive& p : prims) {
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(p.lo, p.hi);
      const double got = tape_derivative(p.f, x);
      const double want = richardson(p.ref, x, 1e-3);
      EXPECT_LT(rel_err(got, want), 1e-6) << p.name << " at x=" << x;
      Tape tape;
      EXPECT_LT(rel_err(p.f(tape.variable(x)).value(), p.ref(x)), 1e-15) << p.name;
    }
  }
}

TEST(Tape, GradientOfSumIsSumOfGradients) {
  Rng rng(5);
  Tape tape;
  std::vector<Var> p;
  for (int i = 0; i < 6; ++i) p.push_back(tape.variable(rng.uniform(-1, 1)));
  const Var l1 = tanh(p[0] * p[1] + p[2]) * p[3];
  const Var l2 = exp(p[3] * p[4]) + sin(p[5] * p[0]);
  const auto g1 = param_gradient(l1, p);
  const auto g2 = param_gradient(l2, p);
  const auto g = param_gradient(l1 + l2, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(g[i], g1[i] + g2[i], 1e-15 * std::max(1.0, std::abs(g[i])));
  }
}

// --- input derivatives ----------------------------------------------------------

TEST(InputDerivatives, Identity) {
  JetPredictor id = [](std::span<const Jet<Var>> x) { return x[0]; };
  const double p[] = {0.3};
  const DerivativeBundle b = eval_with_input_derivatives(id, 1, p);
  EXPECT_EQ(b.u, 0.3);
  ASSERT_EQ(b.du.size(), 1u);
  EXPECT_EQ(b.du[0], 1.0);
  EXPECT_EQ(b.d2u[0], 0.0);
}

TEST(InputDerivatives, Square) {
  JetPredictor sq = [](std::span<const Jet<Var>> x) { return x[0] * x[0]; };
  const double p[] = {2.0};
  const DerivativeBundle b = eval_with_input_derivatives(sq, 1, p);
  EXPECT_EQ(b.u, 4.0);
  EXPECT_EQ(b.du[0], 4.0);
  EXPECT_EQ(b.d2u[0], 2.0);
}

TEST(InputDerivatives, DimensionMismatchIsConfigError) {
  JetPredictor id = [](std::span<const Jet<Var>> x) { return x[0]; };
  const double p[] = {0.1, 0.2};
  EXPECT_THROW(eval_with_input_derivatives(id, 1, p), ConfigError);
}

TEST(InputDerivatives, NonFiniteIntermediateIsNumericError) {
  JetPredictor blow = [](std::span<const Jet<Var>> x) { return exp(Var(1000.0) * x[0]); };
  const double p[] = {1.0};
  try {
    eval_with_input_derivatives(blow, 1, p);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(InputDerivatives, ChainRuleForCubicPolynomials) {
  Rng rng(7);
  auto horner = [](const std::vector<double>& c, const Jet<double>& x) {
    Jet<double> acc = Jet<double>::constant(c[3]);
    for (int k = 2; k >= 0; --k) acc = acc * x + c[k];
    return acc;
  };
  auto poly = [](const std::vector<double>& c, double x, int deriv) {
    if (deriv == 0) return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    if (deriv == 1) return c[1] + x * (2 * c[2] + 3 * x * c[3]);
    return 2 * c[2] + 6 * x * c[3];
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> f(4), g(4);
    for (double& c : f) c = rng.uniform(-2, 2);
    for (double& c : g) c = rng.uniform(-2, 2);
    const double x = rng.uniform(-1, 1);
    const Jet<double> j = horner(f, horner(g, Jet<double>::coordinate(x, 0)));
    const double gx = poly(g, x, 0), g1 = poly(g, x, 1), g2 = poly(g, x, 2);
    const double want1 = poly(f, gx, 1) * g1;
    const double want2 = poly(f, gx, 2) * g1 * g1 + poly(f, gx, 1) * g2;
    EXPECT_NEAR(j.v, poly(f, gx, 0), 1e-12 * std::max(1.0, std::abs(j.v)));
    EXPECT_NEAR(j.g[0], want1, 1e-12 * std::max(1.0, std::abs(want1)));
    EXPECT_NEAR(j.h[0], want2, 1e-12 * std::max(1.0, std::abs(want2)));
  }
}

TEST(InputDerivatives, MlpMatchesCentralDifferences) {
  for (std::size_t dim : {1u, 2u}) {
    networks::MlpConfig cfg = networks::default_mlp(dim);
    // A freshly initialized net is nearly linear on [0,1]; steepen the first
    // layer so curvature is comparable to a trained solution.
    auto params = networks::init_params(cfg, 3 + dim);
    for (double& w : params.tensor("W0")) w *= 8.0;
    std::vector<double> pv(params.values().begin(), params.values().end());
    JetPredictor f = [&](std::span<const Jet<Var>> x) {
      std::vector<Var> p(pv.begin(), pv.end());
      return networks::mlp_apply<Jet<Var>, Var>(cfg, p, x)[0];
    };
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> pt(dim);
      for (double& c : pt) c = rng.uniform(0.05, 0.95);
      const DerivativeBundle b = eval_with_input_derivatives(f, dim, pt);
      for (std::size_t d = 0; d < dim; ++d) {
        auto along = [&](long double s) {
          std::vector<long double> q(pt.begin(), pt.end());
          q[d] = s;
          return mlp_extended(cfg, pv, q);
        };
        const long double h = 1e-4L, x0 = pt[d];
        const double fd1 = static_cast<double>((along(x0 + h) - along(x0 - h)) / (2 * h));
        const double fd2 =
            static_cast<double>((along(x0 + h) - 2 * along(x0) + along(x0 - h)) / (h * h));
        EXPECT_LT(rel_err(b.du[d], fd1), 1e-6) << "dim " << d;
        EXPECT_LT(rel_err(b.d2u[d], fd2), 1e-6) << "dim " << d;
      }
    }
  }
}

// Full PINN loss on 16 collocation points (-eps u'' + u' = f on (0,1), u(0)=0,
// u(1)=1) through a 1-4-1 tanh network.
TEST(ParamGradient, PinnLossMatchesCentralDifferences) {
  networks::MlpConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden_widths = {4};
  cfg.activation = networks::Activation::kTanh;
  const auto init = networks::init_params(cfg, 9);
  const double eps = 0.1;
  std::vector<double> xs;
  for (int i = 0; i < 16; ++i) xs.push_back((i + 0.5) / 16.0);
  const double pi = std::numbers::pi;

  auto loss_of = [&](std::span<const Var> p) {
    Var lr = 0.0;
    for (double x : xs) {
      const Jet<Var> u =
          networks::mlp_apply<Jet<Var>, Var>(cfg, p, std::vector{Jet<Var>::coordinate(x, 0)})[0];
      const double f = eps * pi * pi * std::sin(pi * x) + pi * std::cos(pi * x);
      const Var r = Var(-eps) * u.h[0] + u.g[0] - Var(f);
      lr = lr + r * r;
    }
    Var lb = 0.0;
    for (auto [x, g] : {std::pair{0.0, 0.0}, std::pair{1.0, 1.0}}) {
      const Var u = networks::mlp_apply<Var, Var>(cfg, p, std::vector{Var(x)})[0];
      lb = lb + (u - Var(g)) * (u - Var(g));
    }
    return lr / Var(16.0) + lb / Var(2.0);
  };

  Tape tape;
  std::vector<Var> p;
  for (double v : init.values()) p.push_back(tape.variable(v));
  const auto grad = param_gradient(loss_of(p), p);

  const std::vector<double> base(init.values().begin(), init.values().end());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto along = [&](double s) {
      std::vector<Var> q(base.begin(), base.end());
      q[i] = s;
      return loss_of(q).value();
    };
    const double fd = spinn::test::central(along, base[i], 1e-5);
    if (std::abs(fd) < 1e-9 && std::abs(grad[i]) < 1e-9) continue;
    EXPECT_LT(rel_err(grad[i], fd), 1e-5) << "parameter " << i;
  }
}
