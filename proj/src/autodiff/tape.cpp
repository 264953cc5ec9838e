#include "spinn/autodiff/tape.hpp"

#include <cmath>
#include <string>

#include "spinn/error.hpp"

namespace spinn::autodiff {
namespace {

constexpr std::uint32_t kNone = UINT32_MAX;

void check_finite(const char* op, double value) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("non-finite result from '") + op + "'");
  }
}

Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape() != nullptr && b.tape() != nullptr && a.tape() != b.tape()) {
    throw ConfigError("operands recorded on different tapes");
  }
  return a.tape() != nullptr ? a.tape() : b.tape();
}

bool is_zero_constant(const Var& a) { return a.is_constant() && a.value() == 0.0; }

}  // namespace

Var Tape::variable(double value) {
  check_finite("variable", value);
  return push(value, 0, kNone, 0.0, kNone, 0.0);
}

Var Tape::push(double value, std::uint8_t arity, std::uint32_t p0, double d0, std::uint32_t p1,
               double d1) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{{p0, p1}, {d0, d1}, arity});
  return Var(value, this, index);
}

Var Tape::unary(const char* op, double value, const Var& a, double da) {
  check_finite(op, value);
  if (a.is_constant()) return Var(value);
  return a.tape()->push(value, 1, a.index(), da, kNone, 0.0);
}

Var Tape::binary(const char* op, double value, const Var& a, double da, const Var& b, double db) {
  check_finite(op, value);
  Tape* tape = common_tape(a, b);
  if (tape == nullptr) return Var(value);
  if (a.is_constant()) return tape->push(value, 1, b.index(), db, kNone, 0.0);
  if (b.is_constant()) return tape->push(value, 1, a.index(), da, kNone, 0.0);
  return tape->push(value, 2, a.index(), da, b.index(), db);
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) return adj;
  if (output.tape() != this) throw ConfigError("output is not recorded on this tape");
  adj[output.index()] = 1.0;
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    for (std::uint8_t k = 0; k < n.arity; ++k) adj[n.parent[k]] += a * n.partial[k];
  }
  return adj;
}

std::vector<double> param_gradient(const Var& loss, std::span<const Var> params) {
  std::vector<double> grad(params.size(), 0.0);
  if (loss.is_constant()) return grad;
  const std::vector<double> adj = loss.tape()->adjoints(loss);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Var& p = params[i];
    if (p.is_constant() || p.tape() != loss.tape()) continue;
    if (p.index() < adj.size()) grad[i] = adj[p.index()];
  }
  return grad;
}

Var operator+(const Var& a, const Var& b) {
  if (is_zero_constant(a)) return b;
  if (is_zero_constant(b)) return a;
  return Tape::binary("add", a.value() + b.value(), a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  if (is_zero_constant(b)) return a;
  return Tape::binary("sub", a.value() - b.value(), a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  if (is_zero_constant(a) || is_zero_constant(b)) return Var(0.0);
  return Tape::binary("mul", a.value() * b.value(), a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return Tape::binary("div", q, a, 1.0 / b.value(), b, -q / b.value());
}

Var operator-(const Var& a) { return Tape::unary("neg", -a.value(), a, -1.0); }

Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return Tape::unary("tanh", t, a, 1.0 - t * t);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(const Var& a) {
  const double s = sigmoid(a.value());
  return Tape::unary("sigmoid", s, a, s * (1.0 - s));
}

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return Tape::unary("exp", e, a, e);
}

Var log(const Var& a) { return Tape::unary("log", std::log(a.value()), a, 1.0 / a.value()); }

Var sin(const Var& a) { return Tape::unary("sin", std::sin(a.value()), a, std::cos(a.value())); }

Var cos(const Var& a) { return Tape::unary("cos", std::cos(a.value()), a, -std::sin(a.value())); }

Var acos(const Var& a) {
  const double x = a.value();
  return Tape::unary("acos", std::acos(x), a, -1.0 / std::sqrt(1.0 - x * x));
}

Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return Tape::unary("sqrt", s, a, 0.5 / s);
}

Var pow(const Var& a, double p) {
  const double x = a.value();
  return Tape::unary("pow", std::pow(x, p), a, p * std::pow(x, p - 1.0));
}

}  // namespace spinn::autodiff
