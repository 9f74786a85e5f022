#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc::simd {
namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd_ = avx2_kernels();
    if (simd_ == nullptr) GTEST_SKIP() << "AVX2 not available on this host";
  }
  const KernelTable& ref_ = scalar_kernels();
  const KernelTable* simd_ = nullptr;
};

TEST_F(KernelEquivalence, ReductionsAgreeToRounding) {
  std::mt19937_64 gen(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 1001u, 40000u}) {
    const auto a = random_vector(n, gen);
    const auto b = random_vector(n, gen);
    const double scale = ref_.sum_squares(a.data(), n) + ref_.sum_squares(b.data(), n) + 1.0;
    EXPECT_NEAR(ref_.sum_squares(a.data(), n), simd_->sum_squares(a.data(), n), 1e-13 * scale);
    EXPECT_NEAR(ref_.squared_distance(a.data(), b.data(), n),
                simd_->squared_distance(a.data(), b.data(), n), 1e-13 * scale);
    EXPECT_NEAR(ref_.dot(a.data(), b.data(), n), simd_->dot(a.data(), b.data(), n), 1e-13 * scale);
  }
}

TEST_F(KernelEquivalence, ElementwiseKernelsAreBitIdentical) {
  std::mt19937_64 gen(11);
  for (std::size_t n : {1u, 2u, 7u, 8u, 9u, 333u}) {
    const auto x = random_vector(n, gen);
    auto y_ref = random_vector(n, gen);
    auto y_simd = y_ref;
    ref_.axpy(-0.37, x.data(), y_ref.data(), n);
    simd_->axpy(-0.37, x.data(), y_simd.data(), n);
    EXPECT_EQ(y_ref, y_simd);

    double lo_r, hi_r, lo_s, hi_s;
    ref_.min_max(x.data(), n, &lo_r, &hi_r);
    simd_->min_max(x.data(), n, &lo_s, &hi_s);
    EXPECT_EQ(lo_r, lo_s);
    EXPECT_EQ(hi_r, hi_s);
  }
}

TEST_F(KernelEquivalence, PairArgminMatchesIncludingTies) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::int64_t total = 2 + static_cast<std::int64_t>(gen() % 300);
    const std::int64_t base = static_cast<std::int64_t>(gen() % 50);
    std::vector<double> coef(total + 1), zpow(base + total + 2);
    // Coarse values make exact ties frequent.
    const bool coarse = trial % 3 == 0;
    for (double& c : coef) c = coarse ? std::floor(unit(gen) * 4) : unit(gen);
    for (double& z : zpow) z = coarse ? std::floor(unit(gen) * 4) : unit(gen);
    PairScanArgs args;
    args.coef = coef.data();
    args.zpow = zpow.data();
    args.total = total;
    args.base = base;
    args.p_lo = (total + 1) / 2;
    args.p_hi = total - 1 - static_cast<std::int64_t>(gen() % 3);
    args.z_left = zpow[base];
    args.z_right = zpow[base + total];
    const PairScanResult r = ref_.pair_argmin(args);
    const PairScanResult s = simd_->pair_argmin(args);
    ASSERT_EQ(r.p_right, s.p_right) << "trial " << trial;
    if (r.p_right >= 0) {
      ASSERT_EQ(r.value, s.value);
    }
  }
}

TEST(Kernels, PairArgminEmptyRange) {
  std::vector<double> coef(4, 1.0), zpow(6, 1.0);
  PairScanArgs args{coef.data(), zpow.data(), 3, 0, 2, 1, 1.0, 1.0};
  EXPECT_EQ(scalar_kernels().pair_argmin(args).p_right, -1);
  if (const KernelTable* simd = avx2_kernels()) {
    EXPECT_EQ(simd->pair_argmin(args).p_right, -1);
  }
}

TEST(Kernels, ActiveTableIsOneOfTheVariants) {
  const Isa isa = active_kernels().isa;
  EXPECT_TRUE(isa == Isa::kScalar || isa == Isa::kAvx2);
}

}  // namespace
}  // namespace fedcvlc::simd
