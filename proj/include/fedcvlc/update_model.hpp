#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fedcvlc {

// Dense model-update vector (initial minus locally trained parameters).
class UpdateVector {
 public:
  UpdateVector() = default;
  // Throws InvalidInput on empty or non-finite input.
  explicit UpdateVector(std::vector<double> values);

  static UpdateVector zeros(std::size_t dimension);

  std::size_t dimension() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const UpdateVector&) const = default;

 private:
  std::vector<double> values_;
};

struct RankedUpdates {
  // order[l] is the original index of the (l+1)-th largest magnitude.
  std::vector<std::uint32_t> order;
  double source_norm_sq = 0.0;
};

// Decay model |U{l}| ~ phi * l^alpha over descending-magnitude ranks.
struct PowerLawFit {
  static constexpr double kBetaEpsilon = 1e-6;
  static constexpr double kMagnitudeFloor = 1e-12;

  double alpha = -1.0;
  double phi = 1.0;
  double beta = -1.0;  // 2*alpha + 1, pushed out of (-eps, eps)

  // Builds a fit from alpha, applying the beta clamp.
  static PowerLawFit from_alpha(double alpha, double phi);
};

// Stable ordering by |value| descending; ties keep ascending index.
RankedUpdates rank_by_magnitude(std::span<const double> values);
RankedUpdates rank_by_magnitude(const UpdateVector& u);

// Least squares of log|U{l}| on log l over ranks above the magnitude floor.
// Throws DegenerateDistribution when fewer than two usable ranks exist.
PowerLawFit fit_power_law(const RankedUpdates& ranked, const UpdateVector& u);

// .uvec files: "UVEC", u64 d (little-endian), d little-endian binary32.
void write_uvec(const std::filesystem::path& path, const UpdateVector& u);
UpdateVector read_uvec(const std::filesystem::path& path);

}  // namespace fedcvlc
