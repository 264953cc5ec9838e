#pragma once

// Per-point network evaluation, generic over the value type T (double,
// Jet<double>, Jet<Var>) and the parameter scalar S (double or Var). This is
// the reference route; training uses the batched kernels in batched.hpp.

#include <cstddef>
#include <span>
#include <vector>

#include "spinn/autodiff/jet.hpp"
#include "spinn/networks/config.hpp"
#include "spinn/networks/params.hpp"

namespace spinn::networks {

struct DenseSlice {
  std::size_t w_offset;  // W is out x in, row-major
  std::size_t b_offset;
  std::size_t in;
  std::size_t out;
};

struct ChebSlice {
  std::size_t offset;  // theta[i][j][k] at offset + (i*out + j)*(degree+1) + k
  std::size_t in;
  std::size_t out;
  std::size_t degree;
};

std::vector<DenseSlice> mlp_slices(const MlpConfig& cfg);
std::vector<ChebSlice> kan_slices(const KanConfig& cfg);
std::size_t param_count(const BackboneConfig& cfg);

/// Tensor names: MLP "W<l>" [out,in], "b<l>" [out]; KAN "theta<l>" [in,out,degree+1].
std::vector<TensorSpec> tensor_table(const BackboneConfig& cfg, const std::string& prefix = "");

/// T_0..T_n at x_norm by the three-term recurrence. Throws std::domain_error
/// when |x_norm| > 1.
std::vector<double> chebyshev_basis(double x_norm, std::size_t n);

namespace detail {

template <class T>
struct ScalarOf {
  using type = T;
};
template <class S>
struct ScalarOf<autodiff::Jet<S>> {
  using type = S;
};

template <class T>
T constant_like(double c) {
  return T(c);
}
template <>
inline autodiff::Jet<double> constant_like<autodiff::Jet<double>>(double c) {
  return autodiff::Jet<double>::constant(c);
}
template <>
inline autodiff::Jet<autodiff::Var> constant_like<autodiff::Jet<autodiff::Var>>(double c) {
  return autodiff::Jet<autodiff::Var>::constant(autodiff::Var(c));
}

template <class T>
T activate(Activation act, const T& z) {
  using std::tanh;
  if (act == Activation::kTanh) return tanh(z);
  return autodiff::sigmoid(z);
}

}  // namespace detail

template <class T, class S>
std::vector<T> mlp_apply(const MlpConfig& cfg, std::span<const S> p, std::span<const T> x) {
  std::vector<T> a(x.begin(), x.end());
  const std::vector<DenseSlice> slices = mlp_slices(cfg);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const DenseSlice& s = slices[l];
    const bool last = l + 1 == slices.size();
    std::vector<T> z(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      T acc = detail::constant_like<T>(0.0);
      for (std::size_t i = 0; i < s.in; ++i) acc = acc + p[s.w_offset + o * s.in + i] * a[i];
      acc = acc + p[s.b_offset + o];
      z[o] = last ? acc : detail::activate(cfg.activation, acc);
    }
    a = std::move(z);
  }
  return a;
}

template <class T, class S>
std::vector<T> kan_apply(const KanConfig& cfg, std::span<const S> p, std::span<const T> x) {
  using std::tanh;
  using Scalar = typename detail::ScalarOf<T>::type;
  std::vector<T> a(x.begin(), x.end());
  for (const ChebSlice& s : kan_slices(cfg)) {
    const std::size_t nb = s.degree + 1;
    std::vector<T> basis(s.in * nb);
    for (std::size_t i = 0; i < s.in; ++i) {
      const T xn = tanh(a[i]);
      T* b = &basis[i * nb];
      b[0] = detail::constant_like<T>(1.0);
      if (nb > 1) b[1] = xn;
      for (std::size_t k = 2; k < nb; ++k) b[k] = Scalar(2.0) * (xn * b[k - 1]) - b[k - 2];
    }
    std::vector<T> z(s.out);
    for (std::size_t j = 0; j < s.out; ++j) {
      T acc = detail::constant_like<T>(0.0);
      for (std::size_t i = 0; i < s.in; ++i) {
        for (std::size_t k = 0; k < nb; ++k) {
          acc = acc + p[s.offset + (i * s.out + j) * nb + k] * basis[i * nb + k];
        }
      }
      z[j] = acc;
    }
    a = std::move(z);
  }
  return a;
}

template <class T, class S>
std::vector<T> backbone_apply(const BackboneConfig& cfg, std::span<const S> p,
                              std::span<const T> x) {
  if (const auto* mlp = std::get_if<MlpConfig>(&cfg)) return mlp_apply<T, S>(*mlp, p, x);
  return kan_apply<T, S>(std::get<KanConfig>(cfg), p, x);
}

/// Plain evaluations; throw ConfigError on shape mismatch.
std::vector<double> mlp_forward(const NetworkParams& params, std::span<const double> x,
                                const MlpConfig& cfg);
std::vector<double> kan_forward(const NetworkParams& params, std::span<const double> x,
                                const KanConfig& cfg);

}  // namespace spinn::networks
