#include "fedcvlc/update_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedcvlc/error.hpp"
#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc {
namespace {

constexpr std::array<char, 4> kUvecMagic{'U', 'V', 'E', 'C'};

template <typename T>
void put_le(std::ostream& out, T value) {
  auto raw = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
}

template <typename T>
bool get_le(std::istream& in, T* value) {
  std::array<unsigned char, sizeof(T)> raw{};
  if (!in.read(reinterpret_cast<char*>(raw.data()), raw.size())) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  *value = std::bit_cast<T>(raw);
  return true;
}

}  // namespace

UpdateVector::UpdateVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInvalidInput, "update vector must have d >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "update vector has non-finite value");
  }
}

UpdateVector UpdateVector::zeros(std::size_t dimension) {
  return UpdateVector(std::vector<double>(dimension, 0.0));
}

PowerLawFit PowerLawFit::from_alpha(double alpha, double phi) {
  PowerLawFit fit;
  fit.alpha = alpha;
  fit.phi = phi;
  fit.beta = 2.0 * alpha + 1.0;
  if (std::abs(fit.beta) < kBetaEpsilon) fit.beta = fit.beta > 0.0 ? kBetaEpsilon : -kBetaEpsilon;
  return fit;
}

RankedUpdates rank_by_magnitude(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "cannot rank non-finite values");
  }
  RankedUpdates ranked;
  ranked.order.resize(values.size());
  std::iota(ranked.order.begin(), ranked.order.end(), 0u);
  std::stable_sort(ranked.order.begin(), ranked.order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return std::abs(values[a]) > std::abs(values[b]);
                   });
  ranked.source_norm_sq = simd::sum_squares(values);
  return ranked;
}

RankedUpdates rank_by_magnitude(const UpdateVector& u) { return rank_by_magnitude(u.values()); }

PowerLawFit fit_power_law(const RankedUpdates& ranked, const UpdateVector& u) {
  if (u.dimension() < 2 || ranked.order.size() != u.dimension()) {
    throw Error(ErrorCode::kDegenerateDistribution, "power-law fit needs d >= 2");
  }
  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t l = 0; l < ranked.order.size(); ++l) {
    const double mag = std::abs(u[ranked.order[l]]);
    if (mag <= PowerLawFit::kMagnitudeFloor) break;  // ranks are sorted, the rest are smaller
    const double x = std::log(static_cast<double>(l + 1));
    const double y = std::log(mag);
    n += 1.0;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n < 2.0) {
    throw Error(ErrorCode::kDegenerateDistribution, "fewer than two nonzero magnitudes");
  }
  const double mean_x = sx / n;
  const double mean_y = sy / n;
  const double var_x = sxx / n - mean_x * mean_x;
  const double cov_xy = sxy / n - mean_x * mean_y;
  const double slope = cov_xy / var_x;
  return PowerLawFit::from_alpha(slope, std::exp(mean_y - slope * mean_x));
}

void write_uvec(const std::filesystem::path& path, const UpdateVector& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write update vector: " + path.string());
  out.write(kUvecMagic.data(), kUvecMagic.size());
  put_le<std::uint64_t>(out, u.dimension());
  for (double v : u.values()) put_le<float>(out, static_cast<float>(v));
  if (!out) throw Error(ErrorCode::kIo, "cannot write update vector: " + path.string());
}

UpdateVector read_uvec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read update vector: " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kUvecMagic) {
    throw Error(ErrorCode::kIo, "cannot read update vector: bad magic in " + path.string());
  }
  std::uint64_t d = 0;
  if (!get_le(in, &d) || d == 0 || d > (1ULL << 32)) {
    throw Error(ErrorCode::kIo, "cannot read update vector: bad dimension in " + path.string());
  }
  std::vector<double> values(d);
  for (auto& v : values) {
    float f = 0.0f;
    if (!get_le(in, &f)) throw Error(ErrorCode::kIo, "cannot read update vector: truncated " + path.string());
    v = f;
  }
  return UpdateVector(std::move(values));
}

}  // namespace fedcvlc
