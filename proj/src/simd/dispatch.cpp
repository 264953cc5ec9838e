#include <atomic>
#include <cstdlib>
#include <string>

#include "spinn/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <xmmintrin.h>
#endif

namespace spinn::simd {

#if !defined(SPINN_HAVE_AVX2)
const KernelTable* detail::avx2_table() { return nullptr; }
#endif
#if !defined(SPINN_HAVE_NEON)
const KernelTable* detail::neon_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SPINN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  const char* env = std::getenv("SPINN_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &detail::kScalarTable;
  if (want == "avx2" || want == "auto") {
    if (auto* t = kernels_for(Isa::kAvx2)) return t;
  }
  if (want == "neon" || want == "auto") {
    if (auto* t = kernels_for(Isa::kNeon)) return t;
  }
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &detail::kScalarTable;
    case Isa::kAvx2:
      return cpu_has_avx2() ? detail::avx2_table() : nullptr;
    case Isa::kNeon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

bool select_isa(Isa isa) {
  const KernelTable* t = kernels_for(isa);
  if (t == nullptr) return false;
  active().store(t, std::memory_order_release);
  return true;
}

Isa active_isa() { return kernels().isa; }

#if defined(__x86_64__) || defined(_M_X64)
// FTZ (bit 15) and DAZ (bit 6).
ScopedFlushDenormals::ScopedFlushDenormals() : saved_(_mm_getcsr()) {
  _mm_setcsr(static_cast<unsigned>(saved_) | 0x8040u);
}
ScopedFlushDenormals::~ScopedFlushDenormals() { _mm_setcsr(static_cast<unsigned>(saved_)); }
#elif defined(__aarch64__)
ScopedFlushDenormals::ScopedFlushDenormals() {
  unsigned long long fpcr;
  __asm__ __volatile__("mrs %0, fpcr" : "=r"(fpcr));
  saved_ = fpcr;
  fpcr |= (1ull << 24);
  __asm__ __volatile__("msr fpcr, %0" : : "r"(fpcr));
}
ScopedFlushDenormals::~ScopedFlushDenormals() {
  __asm__ __volatile__("msr fpcr, %0" : : "r"(saved_));
}
#else
ScopedFlushDenormals::ScopedFlushDenormals() = default;
ScopedFlushDenormals::~ScopedFlushDenormals() = default;
#endif

}  // namespace spinn::simd
