// NEON variants for AArch64 (Advanced SIMD is baseline there, no flags needed).

#include <arm_neon.h>

#include <cmath>

#include "spinn/simd/kernels.hpp"

namespace spinn::simd {
namespace {

// 4 rows x 8 columns register block: 16 accumulators of 2 lanes.
inline void block_4x8(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                      std::size_t i0, std::size_t j0, bool accumulate) {
  float64x2_t acc[4][4];
  for (int r = 0; r < 4; ++r) {
    double* crow = c.row(i0 + r) + j0;
    for (int q = 0; q < 4; ++q) acc[r][q] = accumulate ? vld1q_f64(crow + 2 * q) : vdupq_n_f64(0.0);
  }
  for (std::size_t k = 0; k < a.cols; ++k) {
    const double* brow = b.row(k) + j0;
    const float64x2_t b0 = vld1q_f64(brow);
    const float64x2_t b1 = vld1q_f64(brow + 2);
    const float64x2_t b2 = vld1q_f64(brow + 4);
    const float64x2_t b3 = vld1q_f64(brow + 6);
    for (int r = 0; r < 4; ++r) {
      const float64x2_t s = vdupq_n_f64(a.row(i0 + r)[k]);
      acc[r][0] = vfmaq_f64(acc[r][0], s, b0);
      acc[r][1] = vfmaq_f64(acc[r][1], s, b1);
      acc[r][2] = vfmaq_f64(acc[r][2], s, b2);
      acc[r][3] = vfmaq_f64(acc[r][3], s, b3);
    }
  }
  for (int r = 0; r < 4; ++r) {
    double* crow = c.row(i0 + r) + j0;
    for (int q = 0; q < 4; ++q) vst1q_f64(crow + 2 * q, acc[r][q]);
  }
}

inline void row_span(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                     std::size_t i, std::size_t j0, std::size_t j1, bool accumulate) {
  double* crow = c.row(i);
  const double* arow = a.row(i);
  std::size_t j = j0;
  for (; j + 2 <= j1; j += 2) {
    float64x2_t acc = accumulate ? vld1q_f64(crow + j) : vdupq_n_f64(0.0);
    for (std::size_t k = 0; k < a.cols; ++k) {
      acc = vfmaq_f64(acc, vdupq_n_f64(arow[k]), vld1q_f64(b.row(k) + j));
    }
    vst1q_f64(crow + j, acc);
  }
  for (; j < j1; ++j) {
    double acc = accumulate ? crow[j] : 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) acc = std::fma(arow[k], b.row(k)[j], acc);
    crow[j] = acc;
  }
}

void gemm_neon(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  std::size_t j0 = 0;
  for (; j0 + 8 <= n; j0 += 8) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_4x8(a, b, c, i, j0, accumulate);
    for (; i < m; ++i) row_span(a, b, c, i, j0, j0 + 8, accumulate);
  }
  if (j0 < n) {
    for (std::size_t i = 0; i < m; ++i) row_span(a, b, c, i, j0, n, accumulate);
  }
}

void mul_neon(const double* s, const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(s + i), vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = s[i] * x[i];
}

void jet_forward_neon(const double* d1, const double* d2, const double* g, const double* h,
                      double* g_out, double* h_out, std::size_t n) {
  if (h_out == nullptr) {
    mul_neon(d1, g, g_out, n);
    return;
  }
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vd1 = vld1q_f64(d1 + i);
    const float64x2_t vg = vld1q_f64(g + i);
    vst1q_f64(g_out + i, vmulq_f64(vd1, vg));
    const float64x2_t t = vmulq_f64(vd1, vld1q_f64(h + i));
    vst1q_f64(h_out + i, vfmaq_f64(t, vld1q_f64(d2 + i), vmulq_f64(vg, vg)));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    g_out[i] = d1[i] * gi;
    h_out[i] = std::fma(d2[i], gi * gi, d1[i] * h[i]);
  }
}

void jet_backward1_neon(const double* d1, const double* d2, const double* g, const double* ag,
                        double* zv, double* zg, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vag = vld1q_f64(ag + i);
    const float64x2_t d2g = vmulq_f64(vld1q_f64(d2 + i), vld1q_f64(g + i));
    vst1q_f64(zv + i, vfmaq_f64(vld1q_f64(zv + i), vag, d2g));
    vst1q_f64(zg + i, vmulq_f64(vag, vld1q_f64(d1 + i)));
  }
  for (; i < n; ++i) {
    zv[i] = std::fma(ag[i], d2[i] * g[i], zv[i]);
    zg[i] = ag[i] * d1[i];
  }
}

void jet_backward2_neon(const double* d1, const double* d2, const double* d3, const double* g,
                        const double* h, const double* ag, const double* ah, double* zv,
                        double* zg, double* zh, std::size_t n) {
  std::size_t i = 0;
  const float64x2_t two = vdupq_n_f64(2.0);
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vg = vld1q_f64(g + i);
    const float64x2_t vd1 = vld1q_f64(d1 + i);
    const float64x2_t vd2 = vld1q_f64(d2 + i);
    const float64x2_t vag = vld1q_f64(ag + i);
    const float64x2_t vah = vld1q_f64(ah + i);
    const float64x2_t d2g = vmulq_f64(vd2, vg);
    float64x2_t acc = vfmaq_f64(vld1q_f64(zv + i), vag, d2g);
    const float64x2_t inner =
        vfmaq_f64(vmulq_f64(vd2, vld1q_f64(h + i)), vld1q_f64(d3 + i), vmulq_f64(vg, vg));
    acc = vfmaq_f64(acc, vah, inner);
    vst1q_f64(zv + i, acc);
    vst1q_f64(zg + i, vfmaq_f64(vmulq_f64(vag, vd1), vah, vmulq_f64(two, d2g)));
    vst1q_f64(zh + i, vmulq_f64(vah, vd1));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    const double d2g = d2[i] * gi;
    double acc = std::fma(ag[i], d2g, zv[i]);
    acc = std::fma(ah[i], std::fma(d3[i], gi * gi, d2[i] * h[i]), acc);
    zv[i] = acc;
    zg[i] = std::fma(ah[i], 2.0 * d2g, ag[i] * d1[i]);
    zh[i] = ah[i] * d1[i];
  }
}

void adam_neon(const AdamCoefficients& c, const double* grad, double* param, double* m, double* v,
               std::size_t n) {
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(c.one_minus_beta1);
  const float64x2_t omb2 = vdupq_n_f64(c.one_minus_beta2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vfmaq_f64(vmulq_f64(omb1, g), b1, vld1q_f64(m + i));
    const float64x2_t vi = vfmaq_f64(vmulq_f64(omb2, vmulq_f64(g, g)), b2, vld1q_f64(v + i));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, bc1);
    const float64x2_t v_hat = vdivq_f64(vi, bc2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, m_hat), vaddq_f64(vsqrtq_f64(v_hat), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  for (; i < n; ++i) {
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

const KernelTable kNeonTable{Isa::kNeon,        gemm_neon,          mul_neon,  jet_forward_neon,
                             jet_backward1_neon, jet_backward2_neon, adam_neon};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeonTable; }
}  // namespace detail

}  // namespace spinn::simd
