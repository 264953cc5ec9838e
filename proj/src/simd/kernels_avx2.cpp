// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached after the
// runtime CPU check in dispatch.cpp.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spinn/simd/kernels.hpp"

namespace spinn::simd {
namespace {

// 6 rows x 8 columns register block: 12 accumulators, leaving room for the
// two B vectors and the broadcast within the 16 ymm registers.
inline void block_6x8(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                      std::size_t i0, std::size_t j0, bool accumulate) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31, c40, c41, c50, c51;
  double* r0 = c.row(i0) + j0;
  double* r1 = c.row(i0 + 1) + j0;
  double* r2 = c.row(i0 + 2) + j0;
  double* r3 = c.row(i0 + 3) + j0;
  double* r4 = c.row(i0 + 4) + j0;
  double* r5 = c.row(i0 + 5) + j0;
  if (accumulate) {
    c00 = _mm256_loadu_pd(r0), c01 = _mm256_loadu_pd(r0 + 4);
    c10 = _mm256_loadu_pd(r1), c11 = _mm256_loadu_pd(r1 + 4);
    c20 = _mm256_loadu_pd(r2), c21 = _mm256_loadu_pd(r2 + 4);
    c30 = _mm256_loadu_pd(r3), c31 = _mm256_loadu_pd(r3 + 4);
    c40 = _mm256_loadu_pd(r4), c41 = _mm256_loadu_pd(r4 + 4);
    c50 = _mm256_loadu_pd(r5), c51 = _mm256_loadu_pd(r5 + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = c40 = c41 = c50 = c51 = _mm256_setzero_pd();
  }
  const double* a0 = a.row(i0);
  const double* a1 = a.row(i0 + 1);
  const double* a2 = a.row(i0 + 2);
  const double* a3 = a.row(i0 + 3);
  const double* a4 = a.row(i0 + 4);
  const double* a5 = a.row(i0 + 5);
  const double* bp = b.data + j0;
  for (std::size_t k = 0; k < a.cols; ++k, bp += b.stride) {
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d s = _mm256_broadcast_sd(a0 + k);
    c00 = _mm256_fmadd_pd(s, b0, c00);
    c01 = _mm256_fmadd_pd(s, b1, c01);
    s = _mm256_broadcast_sd(a1 + k);
    c10 = _mm256_fmadd_pd(s, b0, c10);
    c11 = _mm256_fmadd_pd(s, b1, c11);
    s = _mm256_broadcast_sd(a2 + k);
    c20 = _mm256_fmadd_pd(s, b0, c20);
    c21 = _mm256_fmadd_pd(s, b1, c21);
    s = _mm256_broadcast_sd(a3 + k);
    c30 = _mm256_fmadd_pd(s, b0, c30);
    c31 = _mm256_fmadd_pd(s, b1, c31);
    s = _mm256_broadcast_sd(a4 + k);
    c40 = _mm256_fmadd_pd(s, b0, c40);
    c41 = _mm256_fmadd_pd(s, b1, c41);
    s = _mm256_broadcast_sd(a5 + k);
    c50 = _mm256_fmadd_pd(s, b0, c50);
    c51 = _mm256_fmadd_pd(s, b1, c51);
  }
  _mm256_storeu_pd(r0, c00), _mm256_storeu_pd(r0 + 4, c01);
  _mm256_storeu_pd(r1, c10), _mm256_storeu_pd(r1 + 4, c11);
  _mm256_storeu_pd(r2, c20), _mm256_storeu_pd(r2 + 4, c21);
  _mm256_storeu_pd(r3, c30), _mm256_storeu_pd(r3 + 4, c31);
  _mm256_storeu_pd(r4, c40), _mm256_storeu_pd(r4 + 4, c41);
  _mm256_storeu_pd(r5, c50), _mm256_storeu_pd(r5 + 4, c51);
}

// 1 row x 32 columns: 8 independent chains hide the FMA latency.
inline void block_1x32(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                       std::size_t i, std::size_t j0, bool accumulate) {
  double* crow = c.row(i) + j0;
  __m256d acc[8];
  for (int q = 0; q < 8; ++q) {
    acc[q] = accumulate ? _mm256_loadu_pd(crow + 4 * q) : _mm256_setzero_pd();
  }
  const double* arow = a.row(i);
  const double* bp = b.data + j0;
  for (std::size_t k = 0; k < a.cols; ++k, bp += b.stride) {
    const __m256d s = _mm256_broadcast_sd(arow + k);
    for (int q = 0; q < 8; ++q) acc[q] = _mm256_fmadd_pd(s, _mm256_loadu_pd(bp + 4 * q), acc[q]);
  }
  for (int q = 0; q < 8; ++q) _mm256_storeu_pd(crow + 4 * q, acc[q]);
}

// Columns [j0, j1) of one row: 4-wide then scalar.
inline void row_span(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                     std::size_t i, std::size_t j0, std::size_t j1, bool accumulate) {
  double* crow = c.row(i);
  const double* arow = a.row(i);
  std::size_t j = j0;
  for (; j + 8 <= j1; j += 8) {
    __m256d acc0 = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
    __m256d acc1 = accumulate ? _mm256_loadu_pd(crow + j + 4) : _mm256_setzero_pd();
    const double* bp = b.data + j;
    for (std::size_t k = 0; k < a.cols; ++k, bp += b.stride) {
      const __m256d s = _mm256_broadcast_sd(arow + k);
      acc0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bp), acc0);
      acc1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bp + 4), acc1);
    }
    _mm256_storeu_pd(crow + j, acc0);
    _mm256_storeu_pd(crow + j + 4, acc1);
  }
  for (; j + 4 <= j1; j += 4) {
    __m256d acc = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
    for (std::size_t k = 0; k < a.cols; ++k) {
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + k), _mm256_loadu_pd(b.row(k) + j), acc);
    }
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < j1; ++j) {
    double acc = accumulate ? crow[j] : 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) acc = std::fma(arow[k], b.row(k)[j], acc);
    crow[j] = acc;
  }
}

// 6 rows x 4 columns, for the column remainder.
inline void block_6x4(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                      std::size_t i0, std::size_t j0, bool accumulate) {
  __m256d acc[6];
  for (int r = 0; r < 6; ++r) {
    acc[r] = accumulate ? _mm256_loadu_pd(c.row(i0 + r) + j0) : _mm256_setzero_pd();
  }
  const double* bp = b.data + j0;
  for (std::size_t k = 0; k < a.cols; ++k, bp += b.stride) {
    const __m256d bv = _mm256_loadu_pd(bp);
    for (int r = 0; r < 6; ++r) {
      acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a.row(i0 + r) + k), bv, acc[r]);
    }
  }
  for (int r = 0; r < 6; ++r) _mm256_storeu_pd(c.row(i0 + r) + j0, acc[r]);
}

void gemm_panel(const ConstMatrixView& a, const ConstMatrixView& b, MatrixView& c,
                bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  const std::size_t m6 = m - m % 6;
  const std::size_t n8 = n - n % 8;
  if (m6 > 0 && n8 > 0) {
    // Each 8-column panel of B is copied into contiguous storage once and
    // then reused by every 6-row block.
    thread_local std::vector<double> packed;
    packed.resize(a.cols * 8);
    const ConstMatrixView panel(packed.data(), a.cols, 8, 8);
    for (std::size_t j0 = 0; j0 < n8; j0 += 8) {
      for (std::size_t k = 0; k < a.cols; ++k) {
        _mm256_storeu_pd(packed.data() + 8 * k, _mm256_loadu_pd(b.row(k) + j0));
        _mm256_storeu_pd(packed.data() + 8 * k + 4, _mm256_loadu_pd(b.row(k) + j0 + 4));
      }
      MatrixView cj{c.data + j0, c.rows, 8, c.stride};
      for (std::size_t i = 0; i < m6; i += 6) block_6x8(a, panel, cj, i, 0, accumulate);
    }
  }
  std::size_t j_rest = n8;
  if (n - n8 >= 4) {
    for (std::size_t i = 0; i < m6; i += 6) block_6x4(a, b, c, i, n8, accumulate);
    j_rest += 4;
  }
  if (j_rest < n) {
    for (std::size_t i = 0; i < m6; ++i) row_span(a, b, c, i, j_rest, n, accumulate);
  }
  for (std::size_t i = m6; i < m; ++i) {
    std::size_t j0 = 0;
    for (; j0 + 32 <= n; j0 += 32) block_1x32(a, b, c, i, j0, accumulate);
    row_span(a, b, c, i, j0, n, accumulate);
  }
}

// The inner dimension is split into chunks that keep the B panel cache
// resident. Each c[i][j] still sees its products in k order, so chunking does
// not change the result.
void gemm_avx2(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  constexpr std::size_t kChunk = 256;
  const std::size_t k_total = a.cols;
  if (k_total <= kChunk) {
    gemm_panel(a, b, c, accumulate);
    return;
  }
  for (std::size_t k0 = 0; k0 < k_total; k0 += kChunk) {
    const std::size_t kc = std::min(kChunk, k_total - k0);
    const ConstMatrixView ac(a.data + k0, a.rows, kc, a.stride);
    const ConstMatrixView bc(b.row(k0), kc, b.cols, b.stride);
    gemm_panel(ac, bc, c, accumulate || k0 > 0);
  }
}

void mul_avx2(const double* s, const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = s[i] * x[i];
}

void jet_forward_avx2(const double* d1, const double* d2, const double* g, const double* h,
                      double* g_out, double* h_out, std::size_t n) {
  std::size_t i = 0;
  if (h_out == nullptr) {
    mul_avx2(d1, g, g_out, n);
    return;
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d vd1 = _mm256_loadu_pd(d1 + i);
    const __m256d vg = _mm256_loadu_pd(g + i);
    _mm256_storeu_pd(g_out + i, _mm256_mul_pd(vd1, vg));
    const __m256d t = _mm256_mul_pd(vd1, _mm256_loadu_pd(h + i));
    _mm256_storeu_pd(h_out + i,
                     _mm256_fmadd_pd(_mm256_loadu_pd(d2 + i), _mm256_mul_pd(vg, vg), t));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    g_out[i] = d1[i] * gi;
    h_out[i] = std::fma(d2[i], gi * gi, d1[i] * h[i]);
  }
}

void jet_backward1_avx2(const double* d1, const double* d2, const double* g, const double* ag,
                        double* zv, double* zg, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vag = _mm256_loadu_pd(ag + i);
    const __m256d d2g = _mm256_mul_pd(_mm256_loadu_pd(d2 + i), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(zv + i, _mm256_fmadd_pd(vag, d2g, _mm256_loadu_pd(zv + i)));
    _mm256_storeu_pd(zg + i, _mm256_mul_pd(vag, _mm256_loadu_pd(d1 + i)));
  }
  for (; i < n; ++i) {
    zv[i] = std::fma(ag[i], d2[i] * g[i], zv[i]);
    zg[i] = ag[i] * d1[i];
  }
}

void jet_backward2_avx2(const double* d1, const double* d2, const double* d3, const double* g,
                        const double* h, const double* ag, const double* ah, double* zv,
                        double* zg, double* zh, std::size_t n) {
  std::size_t i = 0;
  const __m256d two = _mm256_set1_pd(2.0);
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d vd1 = _mm256_loadu_pd(d1 + i);
    const __m256d vd2 = _mm256_loadu_pd(d2 + i);
    const __m256d vag = _mm256_loadu_pd(ag + i);
    const __m256d vah = _mm256_loadu_pd(ah + i);
    const __m256d d2g = _mm256_mul_pd(vd2, vg);
    __m256d acc = _mm256_fmadd_pd(vag, d2g, _mm256_loadu_pd(zv + i));
    const __m256d inner = _mm256_fmadd_pd(_mm256_loadu_pd(d3 + i), _mm256_mul_pd(vg, vg),
                                          _mm256_mul_pd(vd2, _mm256_loadu_pd(h + i)));
    acc = _mm256_fmadd_pd(vah, inner, acc);
    _mm256_storeu_pd(zv + i, acc);
    _mm256_storeu_pd(zg + i,
                     _mm256_fmadd_pd(vah, _mm256_mul_pd(two, d2g), _mm256_mul_pd(vag, vd1)));
    _mm256_storeu_pd(zh + i, _mm256_mul_pd(vah, vd1));
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

void adam_avx2(const AdamCoefficients& c, const double* grad, double* param, double* m, double* v,
               std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(c.one_minus_beta1);
  const __m256d omb2 = _mm256_set1_pd(c.one_minus_beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(omb1, g));
    const __m256d vi =
        _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
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

const KernelTable kAvx2Table{Isa::kAvx2,        gemm_avx2,          mul_avx2,  jet_forward_avx2,
                             jet_backward1_avx2, jet_backward2_avx2, adam_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2Table; }
}  // namespace detail

}  // namespace spinn::simd
