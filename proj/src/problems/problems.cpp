#include "spinn/problems/problem.hpp"

#include <cmath>
#include <numbers>

#include "spinn/error.hpp"

namespace spinn::problems {

namespace {

constexpr double kPi = std::numbers::pi;

models::TraceValue constant_trace(double c) { return {c, 0.0, 0.0}; }

// a * sin(k pi s) with its first two derivatives.
models::TraceValue sine_trace(double a, double k, double s) {
  const double w = k * kPi;
  return {a * std::sin(w * s), a * w * std::cos(w * s), -a * w * w * std::sin(w * s)};
}

PointFunction constant(double c) {
  return [c](std::span<const double>) { return c; };
}

ProblemSpec make_intro(double eps) {
  ProblemSpec p;
  p.name = "intro";
  p.equation = "-eps u'' + u' + (1 + eps) u = 0, u(0) = 1 + exp(-(1 + eps)/eps), u(1) = 1 + exp(-1)";
  p.op.reaction = 1.0 + eps;
  p.op.first = {1.0, 0.0};
  p.op.second = {-eps, 0.0};
  const double right = 1.0 + std::exp(-1.0);
  p.dirichlet = {{{0, 0.0}, constant(exact_intro(0.0, eps))}, {{0, 1.0}, constant(right)}};
  p.priors = {{0, 1.0, 1.0 + eps, [right](double) { return constant_trace(right); }}};
  p.exact = [eps](double x) { return exact_intro(x, eps); };
  return p;
}

ProblemSpec make_ex1(double eps) {
  ProblemSpec p;
  p.name = "ex1";
  p.equation = "-eps u'' + u' = eps pi^2 sin(pi x) + pi cos(pi x), u(0) = 0, u(1) = 1";
  p.op.first = {1.0, 0.0};
  p.op.second = {-eps, 0.0};
  p.op.forcing = [eps](std::span<const double> x) {
    return eps * kPi * kPi * std::sin(kPi * x[0]) + kPi * std::cos(kPi * x[0]);
  };
  p.dirichlet = {{{0, 0.0}, constant(0.0)}, {{0, 1.0}, constant(1.0)}};
  p.priors = {{0, 1.0, 1.0, [](double) { return constant_trace(1.0); }}};
  p.exact = [eps](double x) { return exact_ex1(x, eps); };
  return p;
}

ProblemSpec make_ex2(double eps) {
  ProblemSpec p;
  p.name = "ex2";
  p.equation = "eps u'' + (1 + eps) u' + u = 0, u(0) = 0, u(1) = 1";
  p.op.reaction = 1.0;
  p.op.first = {1.0 + eps, 0.0};
  p.op.second = {eps, 0.0};
  p.dirichlet = {{{0, 0.0}, constant(0.0)}, {{0, 1.0}, constant(1.0)}};
  p.priors = {{0, 0.0, 1.0, [](double) { return constant_trace(0.0); }}};
  if (eps != 1.0) p.exact = [eps](double x) { return exact_ex2(x, eps); };
  return p;
}

ProblemSpec make_ex3(double eps) {
  ProblemSpec p;
  p.name = "ex3";
  p.equation = "-eps (u_xx + u_yy) + u_x = 0, u(x,0) = u(x,1) = 0, u(0,y) = sin(pi y), u(1,y) = 2 sin(pi y)";
  p.input_dim = 2;
  p.domain = Domain::kSquare;
  p.coord_names = {"x", "y"};
  p.op.first = {1.0, 0.0};
  p.op.second = {-eps, -eps};
  p.dirichlet = {
      {{0, 0.0}, [](std::span<const double> x) { return std::sin(kPi * x[1]); }},
      {{0, 1.0}, [](std::span<const double> x) { return 2.0 * std::sin(kPi * x[1]); }},
      {{1, 0.0}, constant(0.0)},
      {{1, 1.0}, constant(0.0)},
  };
  p.priors = {{0, 1.0, 1.0, [](double y) { return sine_trace(2.0, 1.0, y); }}};
  return p;
}

ProblemSpec make_ex4(double eps) {
  ProblemSpec p;
  p.name = "ex4";
  p.equation = "eps (u_xx + u_yy) + u_y = 0, u(0,y) = u(1,y) = 0, u(x,0) = 2 sin(pi x), u(x,1) = sin(pi x)";
  p.input_dim = 2;
  p.domain = Domain::kSquare;
  p.coord_names = {"x", "y"};
  p.op.first = {0.0, 1.0};
  p.op.second = {eps, eps};
  p.dirichlet = {
      {{0, 0.0}, constant(0.0)},
      {{0, 1.0}, constant(0.0)},
      {{1, 0.0}, [](std::span<const double> x) { return 2.0 * std::sin(kPi * x[0]); }},
      {{1, 1.0}, [](std::span<const double> x) { return std::sin(kPi * x[0]); }},
  };
  p.priors = {{1, 0.0, 1.0, [](double x) { return sine_trace(2.0, 1.0, x); }}};
  return p;
}

ProblemSpec make_ex5(double eps) {
  ProblemSpec p;
  p.name = "ex5";
  p.equation = "u_t - eps u_xx - u_x - u = 0, u(x,0) = cos(2 pi x), u(0,t) = 0, u(1,t) = 1";
  p.input_dim = 2;
  p.domain = Domain::kSpaceTime;
  p.coord_names = {"x", "t"};
  p.op.reaction = -1.0;
  p.op.first = {-1.0, 1.0};
  p.op.second = {-eps, 0.0};
  p.dirichlet = {{{0, 0.0}, constant(0.0)}, {{0, 1.0}, constant(1.0)}};
  p.initial = DirichletCondition{{1, 0.0}, [](std::span<const double> x) {
                                   return std::cos(2.0 * kPi * x[0]);
                                 }};
  p.priors = {{0, 0.0, 1.0, [](double) { return constant_trace(0.0); }}};
  return p;
}

ProblemSpec make_ex6(double eps) {
  ProblemSpec p;
  p.name = "ex6";
  p.equation = "u_t - eps u_xx + u_x + 5 u = 0, u(x,0) = sin(2 pi x), u(0,t) = 0, u(1,t) = 1";
  p.input_dim = 2;
  p.domain = Domain::kSpaceTime;
  p.coord_names = {"x", "t"};
  p.op.reaction = 5.0;
  p.op.first = {1.0, 1.0};
  p.op.second = {-eps, 0.0};
  p.dirichlet = {{{0, 0.0}, constant(0.0)}, {{0, 1.0}, constant(1.0)}};
  p.initial = DirichletCondition{{1, 0.0}, [](std::span<const double> x) {
                                   return std::sin(2.0 * kPi * x[0]);
                                 }};
  p.priors = {{0, 1.0, 1.0, [](double) { return constant_trace(1.0); }}};
  return p;
}

}  // namespace

std::string to_string(Domain d) {
  switch (d) {
    case Domain::kInterval:
      return "interval";
    case Domain::kSquare:
      return "square";
    case Domain::kSpaceTime:
      return "space-time";
  }
  return "unknown";
}

std::string Face::name(std::span<const std::string> coord_names) const {
  const std::string c = dim < coord_names.size() ? coord_names[dim] : "x" + std::to_string(dim);
  return c + (position == 0.0 ? "=0" : "=1");
}

double ProblemSpec::residual(std::span<const double> x, const autodiff::DerivativeBundle& b) const {
  double r = op.reaction * b.u;
  for (std::size_t d = 0; d < input_dim; ++d) {
    r += op.first[d] * b.du[d] + op.second[d] * b.d2u[d];
  }
  return r - op.forcing_at(x);
}

bool ProblemSpec::in_open_domain(std::span<const double> x) const {
  if (x.size() != input_dim) return false;
  for (std::size_t d = 0; d < input_dim; ++d) {
    const bool closed_top = time_dependent() && d == 1;
    if (!(x[d] > 0.0 && (closed_top ? x[d] <= 1.0 : x[d] < 1.0))) return false;
  }
  return true;
}

double ProblemSpec::boundary_value(const Face& face, std::span<const double> x) const {
  if (initial && initial->face.dim == face.dim && initial->face.position == face.position) {
    return initial->value(x);
  }
  for (const auto& c : dirichlet) {
    if (c.face.dim == face.dim && c.face.position == face.position) return c.value(x);
  }
  throw LookupError("problem " + name + " has no condition on face " + face.name(coord_names));
}

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {"intro", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6"};
  return names;
}

ProblemSpec make_problem(const std::string& name, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  ProblemSpec p;
  if (name == "intro") {
    p = make_intro(epsilon);
  } else if (name == "ex1") {
    p = make_ex1(epsilon);
  } else if (name == "ex2") {
    p = make_ex2(epsilon);
  } else if (name == "ex3") {
    p = make_ex3(epsilon);
  } else if (name == "ex4") {
    p = make_ex4(epsilon);
  } else if (name == "ex5") {
    p = make_ex5(epsilon);
  } else if (name == "ex6") {
    p = make_ex6(epsilon);
  } else {
    std::string known;
    for (const auto& n : problem_names()) known += (known.empty() ? "" : ", ") + n;
    throw LookupError("unknown problem '" + name + "' (known: " + known + ")");
  }
  p.epsilon = epsilon;
  if (p.coord_names.empty()) p.coord_names = {"x"};
  return p;
}

std::vector<models::AsymptoticPrior> prior_for(const ProblemSpec& problem) {
  return problem.priors;
}

std::vector<models::AsymptoticPrior> prior_for(const std::string& name, double epsilon) {
  return make_problem(name, epsilon).priors;
}

double exact_ex1(double x, double eps) {
  const double tail = std::exp(-1.0 / eps);
  return std::sin(kPi * x) + (std::exp((x - 1.0) / eps) - tail) / (1.0 - tail);
}

double exact_ex2(double x, double eps) {
  if (eps == 1.0) throw ConfigError("ex2 closed form is degenerate at epsilon = 1");
  return (std::exp(-x) - std::exp(-x / eps)) / (std::exp(-1.0) - std::exp(-1.0 / eps));
}

double exact_intro(double x, double eps) {
  return std::exp(-x) + std::exp((1.0 + eps) * (x - 1.0) / eps);
}

}  // namespace spinn::problems
