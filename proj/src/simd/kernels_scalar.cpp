#include <cmath>

#include "spinn/simd/kernels.hpp"

namespace spinn::simd {
namespace {

void gemm_scalar(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  const std::size_t kk = a.cols;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.row(i);
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    const double* arow = a.row(i);
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aik, brow[j], crow[j]);
    }
  }
}

void mul_scalar(const double* s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = s[i] * x[i];
}

void jet_forward_scalar(const double* d1, const double* d2, const double* g, const double* h,
                        double* g_out, double* h_out, std::size_t n) {
  if (h_out == nullptr) {
    for (std::size_t i = 0; i < n; ++i) g_out[i] = d1[i] * g[i];
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    g_out[i] = d1[i] * gi;
    h_out[i] = std::fma(d2[i], gi * gi, d1[i] * h[i]);
  }
}

void jet_backward1_scalar(const double* d1, const double* d2, const double* g, const double* ag,
                          double* zv, double* zg, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    zv[i] = std::fma(ag[i], d2[i] * g[i], zv[i]);
    zg[i] = ag[i] * d1[i];
  }
}

void jet_backward2_scalar(const double* d1, const double* d2, const double* d3, const double* g,
                          const double* h, const double* ag, const double* ah, double* zv,
                          double* zg, double* zh, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double d2g = d2[i] * gi;
    double acc = std::fma(ag[i], d2g, zv[i]);
    acc = std::fma(ah[i], std::fma(d3[i], gi * gi, d2[i] * h[i]), acc);
    zv[i] = acc;
    zg[i] = std::fma(ah[i], 2.0 * d2g, ag[i] * d1[i]);
    zh[i] = ah[i] * d1[i];
  }
}

void adam_scalar(const AdamCoefficients& c, const double* grad, double* param, double* m,
                 double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    const double mi = std::fma(c.beta1, m[i], c.one_minus_beta1 * g);
    const double vi = std::fma(c.beta2, v[i], c.one_minus_beta2 * (g * g));
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi / c.bias_correction1;
    const double v_hat = vi / c.bias_correction2;
    param[i] = param[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::kScalar,          gemm_scalar,          mul_scalar,
                               jet_forward_scalar,    jet_backward1_scalar, jet_backward2_scalar,
                               adam_scalar};
}  // namespace detail

}  // namespace spinn::simd
