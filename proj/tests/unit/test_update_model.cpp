#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "fedcvlc/error.hpp"
#include "fedcvlc/update_model.hpp"

namespace fedcvlc {
namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

TEST(UpdateVector, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(code_of([] { UpdateVector u(std::vector<double>{}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { UpdateVector u({1.0, std::nan("")}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { UpdateVector u({std::numeric_limits<double>::infinity()}); }),
            ErrorCode::kInvalidInput);
}

TEST(RankByMagnitude, Examples) {
  const RankedUpdates r = rank_by_magnitude(UpdateVector({0.1, -3.0, 2.0}));
  EXPECT_EQ(r.order, (std::vector<std::uint32_t>{1, 2, 0}));
  EXPECT_NEAR(r.source_norm_sq, 13.01, 1e-12);

  EXPECT_EQ(rank_by_magnitude(UpdateVector({5.0})).order, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(rank_by_magnitude(UpdateVector({1.0, -1.0, 1.0})).order,
            (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(RankByMagnitude, RejectsNonFiniteSpan) {
  const std::vector<double> v{1.0, std::numeric_limits<double>::infinity()};
  EXPECT_EQ(code_of([&] { rank_by_magnitude(std::span<const double>(v)); }),
            ErrorCode::kInvalidInput);
}

TEST(RankByMagnitude, PermutationOrderAndNormProperties) {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + gen() % 500;
    std::vector<double> v(d);
    // Coarse values so ties occur.
    for (double& x : v) x = std::round(normal(gen) * 4.0) / 4.0;
    const RankedUpdates r = rank_by_magnitude(UpdateVector(v));

    std::vector<std::uint32_t> sorted = r.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < d; ++i) ASSERT_EQ(sorted[i], i);

    double ranked_sq = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double a = std::abs(v[r.order[l]]);
      ranked_sq += a * a;
      if (l > 0) {
        const double prev = std::abs(v[r.order[l - 1]]);
        ASSERT_LE(a, prev);
        if (a == prev) {
          ASSERT_LT(r.order[l - 1], r.order[l]);
        }
      }
    }
    const double direct = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    ASSERT_NEAR(ranked_sq, r.source_norm_sq, 1e-9 * std::max(1.0, direct));
    ASSERT_NEAR(direct, r.source_norm_sq, 1e-9 * std::max(1.0, direct));
  }
}

UpdateVector power_law_vector(std::size_t d, double alpha, double phi) {
  std::vector<double> v(d);
  for (std::size_t l = 1; l <= d; ++l) v[l - 1] = phi * std::pow(static_cast<double>(l), alpha);
  return UpdateVector(std::move(v));
}

PowerLawFit fit(const UpdateVector& u) { return fit_power_law(rank_by_magnitude(u), u); }

TEST(FitPowerLaw, RecoversExactPowerLaw) {
  const PowerLawFit f = fit(power_law_vector(1000, -0.8, 2.0));
  EXPECT_NEAR(f.alpha, -0.8, 1e-6);
  EXPECT_NEAR(f.phi, 2.0, 1e-3);
  EXPECT_DOUBLE_EQ(f.beta, 2.0 * f.alpha + 1.0);
}

TEST(FitPowerLaw, RecoveryGridWithinRelativeTolerance) {
  for (double alpha = -2.0; alpha <= -0.1 + 1e-9; alpha += 0.1) {
    for (double phi : {0.1, 0.5, 1.0, 3.3, 10.0}) {
      const PowerLawFit f = fit(power_law_vector(777, alpha, phi));
      EXPECT_NEAR(f.alpha, alpha, 1e-6 * std::abs(alpha)) << alpha << " " << phi;
      EXPECT_NEAR(f.phi, phi, 1e-6 * phi) << alpha << " " << phi;
    }
  }
}

TEST(FitPowerLaw, PermutationAndSignInvariant) {
  std::mt19937_64 gen(9);
  const UpdateVector base = power_law_vector(500, -1.1, 0.7);
  std::vector<double> v(base.values().begin(), base.values().end());
  // Jitter so the fit is not exact, then compare shuffles.
  std::normal_distribution<double> noise(0.0, 0.05);
  for (double& x : v) x *= std::exp(noise(gen));
  const PowerLawFit ref = fit(UpdateVector(v));
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(v.begin(), v.end(), gen);
    for (double& x : v) {
      if (gen() & 1) x = -x;
    }
    const PowerLawFit f = fit(UpdateVector(v));
    EXPECT_EQ(f.alpha, ref.alpha);
    EXPECT_EQ(f.phi, ref.phi);
  }
}

TEST(FitPowerLaw, FlatMagnitudesClampBeta) {
  // Zero slope gives beta = 1 from 2*alpha + 1; only beta near zero is clamped.
  const PowerLawFit f = fit(UpdateVector(std::vector<double>(50, 3.0)));
  EXPECT_NEAR(f.alpha, 0.0, 1e-12);
  EXPECT_NEAR(f.phi, 3.0, 1e-12);
  EXPECT_NEAR(f.beta, 1.0, 1e-12);

  const PowerLawFit clamped = PowerLawFit::from_alpha(-0.5, 1.0);
  EXPECT_EQ(std::abs(clamped.beta), PowerLawFit::kBetaEpsilon);
  const PowerLawFit near_zero = PowerLawFit::from_alpha(-0.5 + 1e-9, 1.0);
  EXPECT_EQ(near_zero.beta, PowerLawFit::kBetaEpsilon);
}

TEST(FitPowerLaw, IgnoresZeroMagnitudes) {
  UpdateVector u = power_law_vector(100, -0.6, 1.5);
  std::vector<double> v(u.values().begin(), u.values().end());
  v.resize(300, 0.0);
  const PowerLawFit f = fit(UpdateVector(v));
  EXPECT_NEAR(f.alpha, -0.6, 1e-9);
  EXPECT_NEAR(f.phi, 1.5, 1e-9);
}

TEST(FitPowerLaw, DegenerateInputs) {
  EXPECT_EQ(code_of([] { fit(UpdateVector({4.0})); }), ErrorCode::kDegenerateDistribution);
  EXPECT_EQ(code_of([] { fit(UpdateVector({0.0, 2.0, 0.0})); }),
            ErrorCode::kDegenerateDistribution);
  EXPECT_EQ(code_of([] { fit(UpdateVector::zeros(10)); }), ErrorCode::kDegenerateDistribution);
}

class UvecFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("fedcvlc_uvec_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".uvec");
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

TEST_F(UvecFile, RoundtripAtBinary32Precision) {
  const UpdateVector u({0.1, -2.5, 1e-3, 7.0});
  write_uvec(path_, u);
  EXPECT_EQ(std::filesystem::file_size(path_), 4u + 8u + 4u * 4u);
  const UpdateVector back = read_uvec(path_);
  ASSERT_EQ(back.dimension(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(u[i])));
  }
}

TEST_F(UvecFile, LittleEndianLayout) {
  write_uvec(path_, UpdateVector({1.0}));
  std::ifstream in(path_, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> expected{'U', 'V', 'E', 'C', 1, 0, 0, 0, 0, 0, 0, 0,
                                            0x00, 0x00, 0x80, 0x3f};
  EXPECT_EQ(bytes, expected);
}

TEST_F(UvecFile, MissingAndMalformedFiles) {
  try {
    read_uvec(path_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("cannot read update vector"), std::string::npos);
  }
  {
    std::ofstream out(path_, std::ios::binary);
    out << "UVEC";
    const char d[8] = {3, 0, 0, 0, 0, 0, 0, 0};
    out.write(d, 8);
    out.write("\0\0\0\0", 4);  // one value short of three
  }
  EXPECT_EQ(code_of([&] { read_uvec(path_); }), ErrorCode::kIo);
  {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out << "NOPE";
  }
  EXPECT_EQ(code_of([&] { read_uvec(path_); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace fedcvlc
