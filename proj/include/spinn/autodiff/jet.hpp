#pragma once

// Second-order forward-mode values: (u, du/dx_d, d2u/dx_d^2) for each input
// dimension d. Mixed partials are not tracked; each dimension is an
// independent univariate Taylor expansion sharing the value.
//
// Jet<double> evaluates input derivatives; Jet<Var> additionally records the
// whole computation on a tape so parameter gradients flow through the
// derivative channels.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "spinn/autodiff/tape.hpp"

namespace spinn::autodiff {

inline constexpr std::size_t kMaxDim = 2;

template <class S>
struct Jet {
  S v{};
  std::array<S, kMaxDim> g{};
  std::array<S, kMaxDim> h{};

  static Jet constant(S value) {
    Jet j;
    j.v = value;
    return j;
  }
  /// Coordinate x_dim: unit first derivative along dim.
  static Jet coordinate(S value, std::size_t dim) {
    Jet j;
    j.v = value;
    j.g[dim] = S(1.0);
    return j;
  }
};

/// Chain rule through a scalar function with value f and derivatives f1, f2.
template <class S>
Jet<S> chain(const Jet<S>& u, const S& f, const S& f1, const S& f2) {
  Jet<S> r;
  r.v = f;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = f1 * u.g[d];
    r.h[d] = f2 * (u.g[d] * u.g[d]) + f1 * u.h[d];
  }
  return r;
}

template <class S>
Jet<S> operator+(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v + b.v;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = a.g[d] + b.g[d];
    r.h[d] = a.h[d] + b.h[d];
  }
  return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v - b.v;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = a.g[d] - b.g[d];
    r.h[d] = a.h[d] - b.h[d];
  }
  return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a) {
  return Jet<S>{} - a;
}

template <class S>
Jet<S> operator*(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v * b.v;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = a.g[d] * b.v + a.v * b.g[d];
    r.h[d] = a.h[d] * b.v + S(2.0) * (a.g[d] * b.g[d]) + a.v * b.h[d];
  }
  return r;
}

template <class S>
Jet<S> operator*(const S& s, const Jet<S>& a) {
  Jet<S> r;
  r.v = s * a.v;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = s * a.g[d];
    r.h[d] = s * a.h[d];
  }
  return r;
}

template <class S>
Jet<S> operator+(const Jet<S>& a, const S& s) {
  Jet<S> r = a;
  r.v = a.v + s;
  return r;
}

template <class S>
Jet<S>& operator+=(Jet<S>& a, const Jet<S>& b) {
  return a = a + b;
}

template <class S>
Jet<S> tanh(const Jet<S>& u) {
  using std::tanh;
  const S t = tanh(u.v);
  const S f1 = S(1.0) - t * t;
  const S f2 = S(-2.0) * t * f1;
  return chain(u, t, f1, f2);
}

template <class S>
Jet<S> sigmoid(const Jet<S>& u) {
  const S s = sigmoid(u.v);
  const S f1 = s * (S(1.0) - s);
  const S f2 = f1 * (S(1.0) - S(2.0) * s);
  return chain(u, s, f1, f2);
}

template <class S>
Jet<S> exp(const Jet<S>& u) {
  using std::exp;
  const S e = exp(u.v);
  return chain(u, e, e, e);
}

template <class S>
Jet<S> sin(const Jet<S>& u) {
  using std::cos;
  using std::sin;
  const S s = sin(u.v);
  return chain(u, s, cos(u.v), -s);
}

template <class S>
Jet<S> cos(const Jet<S>& u) {
  using std::cos;
  using std::sin;
  const S c = cos(u.v);
  return chain(u, c, -sin(u.v), -c);
}

/// Lifts a constant-w.r.t.-parameters jet into another scalar type.
template <class S>
Jet<S> lift(const Jet<double>& j) {
  Jet<S> r;
  r.v = S(j.v);
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    r.g[d] = S(j.g[d]);
    r.h[d] = S(j.h[d]);
  }
  return r;
}

/// Value and pure first/second input derivatives at one point.
struct DerivativeBundle {
  double u = 0.0;
  std::vector<double> du;
  std::vector<double> d2u;
};

template <class S>
DerivativeBundle to_bundle(const Jet<S>& j, std::size_t dim) {
  DerivativeBundle b;
  b.u = value_of(j.v);
  b.du.resize(dim);
  b.d2u.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    b.du[d] = value_of(j.g[d]);
    b.d2u[d] = value_of(j.h[d]);
  }
  return b;
}

}  // namespace spinn::autodiff
