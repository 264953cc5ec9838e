#pragma once

// Scalar reverse-mode computational graph.
//
// A Var is either a constant (no tape) or a node on a Tape. Every primitive
// records its local partials against at most two predecessors. Nodes are
// appended in evaluation order, so the tape is a topological order by
// construction and the backward sweep is a single reverse pass.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spinn::autodiff {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT(google-explicit-constructor): constants

  double value() const { return value_; }
  bool is_constant() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  friend class Tape;
  Var(double value, Tape* tape, std::uint32_t index) : value_(value), tape_(tape), index_(index) {}

  double value_ = 0.0;
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent leaf.
  Var variable(double value);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// d(output)/d(node) for every node on this tape (zero where unreachable).
  std::vector<double> adjoints(const Var& output) const;

  // Primitive recording; used by the operator overloads. `op` names the
  // primitive in error messages when the value is not finite.
  static Var unary(const char* op, double value, const Var& a, double da);
  static Var binary(const char* op, double value, const Var& a, double da, const Var& b,
                    double db);

 private:
  struct Node {
    std::uint32_t parent[2];
    double partial[2];
    std::uint8_t arity;
  };
  Var push(double value, std::uint8_t arity, std::uint32_t p0, double d0, std::uint32_t p1,
           double d1);

  std::vector<Node> nodes_;
};

/// dL/dparams; parameters the loss does not depend on get exactly 0.
std::vector<double> param_gradient(const Var& loss, std::span<const Var> params);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var acos(const Var& a);  // open interval (-1, 1) only
Var sqrt(const Var& a);
Var pow(const Var& a, double p);

double sigmoid(double x);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace spinn::autodiff
