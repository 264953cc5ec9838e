#pragma once

// Data-parallel inner loops used by the batched network evaluation and the
// optimizer. Every kernel has a portable scalar reference and optional SIMD
// variants (AVX2+FMA on x86-64, NEON on AArch64) chosen once at runtime.
//
// All variants perform the same sequence of IEEE operations per output
// element (sequential reductions, explicit fused multiply-adds), so their
// results are bit-identical. The unit tests assert exact equality.

#include <cstddef>
#include <span>
#include <string_view>

namespace spinn::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

/// Row-major view with an explicit row stride (in elements).
struct MatrixView {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  double* row(std::size_t r) const { return data + r * stride; }
};

struct ConstMatrixView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  ConstMatrixView() = default;
  ConstMatrixView(const double* d, std::size_t r, std::size_t c, std::size_t s)
      : data(d), rows(r), cols(c), stride(s) {}
  ConstMatrixView(MatrixView m)  // NOLINT(google-explicit-constructor)
      : data(m.data), rows(m.rows), cols(m.cols), stride(m.stride) {}

  const double* row(std::size_t r) const { return data + r * stride; }
};

struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double one_minus_beta1;
  double one_minus_beta2;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
  double eps;
};

/// Function table for one instruction set.
struct KernelTable {
  Isa isa;

  // c = a*b (accumulate=false) or c += a*b. For every c[i][j] the sum runs
  // over k = 0..K-1 in order, one fma per term, starting from 0 or c[i][j].
  void (*gemm)(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate);

  // y[i] = s[i] * x[i]
  void (*mul)(const double* s, const double* x, double* y, std::size_t n);

  // Forward jet map through an elementwise function with derivatives d1, d2:
  //   g_out = d1*g;  h_out = fma(d2, g*g, d1*h)
  void (*jet_forward)(const double* d1, const double* d2, const double* g, const double* h,
                      double* g_out, double* h_out, std::size_t n);

  // Adjoint of jet_forward for a first-order channel:
  //   zv = fma(ag, d2*g, zv);  zg = ag*d1
  void (*jet_backward1)(const double* d1, const double* d2, const double* g, const double* ag,
                        double* zv, double* zg, std::size_t n);

  // Adjoint of jet_forward for a second-order channel:
  //   zv = fma(ag, d2*g, zv);  zv = fma(ah, fma(d3, g*g, d2*h), zv)
  //   zg = fma(ah, 2*(d2*g), ag*d1);  zh = ah*d1
  void (*jet_backward2)(const double* d1, const double* d2, const double* d3, const double* g,
                        const double* h, const double* ag, const double* ah, double* zv,
                        double* zg, double* zh, std::size_t n);

  // Bias-corrected Adam update in place.
  void (*adam)(const AdamCoefficients& c, const double* grad, double* param, double* m, double* v,
               std::size_t n);
};

/// The table currently in use. Chosen on first call from SPINN_SIMD
/// (scalar|avx2|neon|auto, default auto) and the running CPU.
const KernelTable& kernels();

/// Table for a specific ISA, or nullptr when not compiled in or not
/// supported by this CPU.
const KernelTable* kernels_for(Isa isa);

/// Overrides the active table. Returns false if the ISA is unavailable.
bool select_isa(Isa isa);

Isa active_isa();

/// Flushes subnormal results and operands to zero on the calling thread for
/// its lifetime. Layer factors like exp(-d/eps) otherwise drag whole
/// backward passes through the slow subnormal path.
class ScopedFlushDenormals {
 public:
  ScopedFlushDenormals();
  ~ScopedFlushDenormals();
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

 private:
  unsigned long long saved_ = 0;
};

namespace detail {
extern const KernelTable kScalarTable;
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace spinn::simd
