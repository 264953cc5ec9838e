#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spinn/random.hpp"
#include "spinn/simd/kernels.hpp"

using namespace spinn;
using namespace spinn::simd;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (const KernelTable* t = kernels_for(isa)) out.push_back(t);
  }
  return out;
}

void expect_bitwise(const std::vector<double>& a, const std::vector<double>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i], b[i]) << "index " << i;
  }
}

}  // namespace

TEST(Gemm, ScalarMatchesNaiveProduct) {
  Rng rng(1);
  const std::size_t m = 7, k = 5, n = 9;
  auto a = random_vec(m * k, rng);
  auto b = random_vec(k * n, rng);
  std::vector<double> c(m * n, 0.0);
  detail::kScalarTable.gemm({a.data(), m, k, k}, {b.data(), k, n, n}, {c.data(), m, n, n}, false);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (std::size_t q = 0; q < k; ++q) want += a[i * k + q] * b[q * n + j];
      EXPECT_NEAR(c[i * n + j], want, 1e-14);
    }
  }
}

TEST(Gemm, AccumulateAddsToExisting) {
  std::vector<double> a{1, 2}, b{3, 4};
  std::vector<double> c{10.0};
  detail::kScalarTable.gemm({a.data(), 1, 2, 2}, {b.data(), 2, 1, 1}, {c.data(), 1, 1, 1}, true);
  EXPECT_EQ(c[0], 21.0);
}

TEST(SimdEquivalence, GemmIsBitIdentical) {
  for (const KernelTable* t : simd_tables()) {
    Rng rng(2);
    for (std::size_t m : {1u, 3u, 4u, 9u, 100u}) {
      for (std::size_t k : {1u, 2u, 17u, 100u}) {
        for (std::size_t n : {1u, 3u, 4u, 15u, 16u, 33u, 250u}) {
          // Strided views into larger buffers.
          const std::size_t sa = k + 3, sb = n + 5, sc = n + 2;
          auto a = random_vec(m * sa, rng);
          auto b = random_vec(k * sb, rng);
          auto c0 = random_vec(m * sc, rng);
          for (bool acc : {false, true}) {
            auto c_ref = c0;
            auto c_simd = c0;
            detail::kScalarTable.gemm({a.data(), m, k, sa}, {b.data(), k, n, sb},
                                      {c_ref.data(), m, n, sc}, acc);
            t->gemm({a.data(), m, k, sa}, {b.data(), k, n, sb}, {c_simd.data(), m, n, sc}, acc);
            SCOPED_TRACE(std::string(isa_name(t->isa)) + " m=" + std::to_string(m) +
                         " k=" + std::to_string(k) + " n=" + std::to_string(n));
            expect_bitwise(c_ref, c_simd);
          }
        }
      }
    }
  }
}

TEST(SimdEquivalence, ElementwiseKernelsAreBitIdentical) {
  for (const KernelTable* t : simd_tables()) {
    SCOPED_TRACE(std::string(isa_name(t->isa)));
    Rng rng(3);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 13u, 1001u}) {
      auto d1 = random_vec(n, rng), d2 = random_vec(n, rng), d3 = random_vec(n, rng);
      auto g = random_vec(n, rng), h = random_vec(n, rng);
      auto ag = random_vec(n, rng), ah = random_vec(n, rng);
      auto zv0 = random_vec(n, rng);

      std::vector<double> y_ref(n), y_simd(n);
      detail::kScalarTable.mul(d1.data(), g.data(), y_ref.data(), n);
      t->mul(d1.data(), g.data(), y_simd.data(), n);
      expect_bitwise(y_ref, y_simd);

      std::vector<double> go_ref(n), ho_ref(n), go_simd(n), ho_simd(n);
      detail::kScalarTable.jet_forward(d1.data(), d2.data(), g.data(), h.data(), go_ref.data(),
                                       ho_ref.data(), n);
      t->jet_forward(d1.data(), d2.data(), g.data(), h.data(), go_simd.data(), ho_simd.data(), n);
      expect_bitwise(go_ref, go_simd);
      expect_bitwise(ho_ref, ho_simd);
      detail::kScalarTable.jet_forward(d1.data(), d2.data(), g.data(), nullptr, go_ref.data(),
                                       nullptr, n);
      t->jet_forward(d1.data(), d2.data(), g.data(), nullptr, go_simd.data(), nullptr, n);
      expect_bitwise(go_ref, go_simd);

      auto zv_ref = zv0, zv_simd = zv0;
      std::vector<double> zg_ref(n), zg_simd(n), zh_ref(n), zh_simd(n);
      detail::kScalarTable.jet_backward1(d1.data(), d2.data(), g.data(), ag.data(), zv_ref.data(),
                                         zg_ref.data(), n);
      t->jet_backward1(d1.data(), d2.data(), g.data(), ag.data(), zv_simd.data(), zg_simd.data(), n);
      expect_bitwise(zv_ref, zv_simd);
      expect_bitwise(zg_ref, zg_simd);

      zv_ref = zv0;
      zv_simd = zv0;
      detail::kScalarTable.jet_backward2(d1.data(), d2.data(), d3.data(), g.data(), h.data(),
                                         ag.data(), ah.data(), zv_ref.data(), zg_ref.data(),
                                         zh_ref.data(), n);
      t->jet_backward2(d1.data(), d2.data(), d3.data(), g.data(), h.data(), ag.data(), ah.data(),
                       zv_simd.data(), zg_simd.data(), zh_simd.data(), n);
      expect_bitwise(zv_ref, zv_simd);
      expect_bitwise(zg_ref, zg_simd);
      expect_bitwise(zh_ref, zh_simd);

      AdamCoefficients c{1e-3, 0.9, 0.999, 0.1, 1e-3, 1.0 - 0.9 * 0.9, 1.0 - 0.999 * 0.999, 1e-8};
      auto p_ref = random_vec(n, rng), m_ref = random_vec(n, rng);
      auto v_ref = random_vec(n, rng, 0.0, 1.0);
      auto p_simd = p_ref, m_simd = m_ref, v_simd = v_ref;
      detail::kScalarTable.adam(c, g.data(), p_ref.data(), m_ref.data(), v_ref.data(), n);
      t->adam(c, g.data(), p_simd.data(), m_simd.data(), v_simd.data(), n);
      expect_bitwise(p_ref, p_simd);
      expect_bitwise(m_ref, m_simd);
      expect_bitwise(v_ref, v_simd);
    }
  }
}

TEST(JetKernels, ForwardMatchesChainRule) {
  // tanh at z with dz = g, d2z = h.
  const double z = 0.3, g = 1.7, h = -0.4;
  const double t = std::tanh(z);
  const double d1 = 1 - t * t, d2 = -2 * t * d1;
  double go = 0, ho = 0;
  detail::kScalarTable.jet_forward(&d1, &d2, &g, &h, &go, &ho, 1);
  EXPECT_NEAR(go, d1 * g, 1e-15);
  EXPECT_NEAR(ho, d2 * g * g + d1 * h, 1e-15);
}

TEST(Dispatch, SelectIsaRoundTrips) {
  const Isa original = active_isa();
  EXPECT_TRUE(select_isa(Isa::kScalar));
  EXPECT_EQ(active_isa(), Isa::kScalar);
  EXPECT_EQ(&kernels(), &detail::kScalarTable);
  select_isa(original);
  EXPECT_EQ(active_isa(), original);
}

TEST(Dispatch, UnavailableIsaIsRejected) {
#if defined(__x86_64__)
  EXPECT_EQ(kernels_for(Isa::kNeon), nullptr);
  EXPECT_FALSE(select_isa(Isa::kNeon));
#else
  EXPECT_EQ(kernels_for(Isa::kAvx2), nullptr);
#endif
}

TEST(Denormals, FlushedInsideScopeOnly) {
  volatile double tiny = 1e-300;
  volatile double scale = 1e-10;
  {
    const ScopedFlushDenormals guard;
    EXPECT_EQ(tiny * scale, 0.0);
  }
  EXPECT_GT(tiny * scale, 0.0);
}
