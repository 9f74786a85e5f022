#include "fedcvlc/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedcvlc/error.hpp"
#include "fedcvlc/rng.hpp"
#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc {
namespace {

void check_bits(int bits) {
  if (bits < kMinCodeBits || bits > kMaxCodeBits) {
    throw Error(ErrorCode::kInvalidBits, "code length must be in [1, 32], got " + std::to_string(bits));
  }
}

float round_down_to_float(double x) {
  float f = static_cast<float>(x);
  if (static_cast<double>(f) > x) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  return f;
}

float round_up_to_float(double x) {
  float f = static_cast<float>(x);
  if (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

// Number of intervals between adjacent centroids for PQ (2^y - 1) and of
// nonzero magnitude levels for QSGD (2^(y-1) - 1).
double pq_intervals(int bits) { return std::ldexp(1.0, bits) - 1.0; }
double qsgd_levels(int bits) { return std::ldexp(1.0, bits - 1) - 1.0; }

// floor(t) plus a Bernoulli(t - floor(t)) draw, clamped to [0, top].
std::uint32_t stochastic_round(double t, double top, double u) {
  t = std::clamp(t, 0.0, top);
  const double base = std::floor(t);
  double level = base + (u < t - base ? 1.0 : 0.0);
  if (level > top) level = top;
  return static_cast<std::uint32_t>(level);
}

}  // namespace

const char* to_string(QuantizerKind kind) {
  return kind == QuantizerKind::kPq ? "pq" : "qsgd";
}

QuantizerKind parse_quantizer_kind(std::string_view name) {
  if (name == "pq" || name == "PQ") return QuantizerKind::kPq;
  if (name == "qsgd" || name == "QSGD") return QuantizerKind::kQsgd;
  throw Error(ErrorCode::kInvalidInput, "unknown quantizer '" + std::string(name) + "'");
}

QuantizedBlock quantize(QuantizerKind kind, std::span<const double> values, int bits,
                        std::uint64_t seed) {
  check_bits(bits);
  if (values.empty()) throw Error(ErrorCode::kInvalidInput, "cannot quantize an empty block");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "cannot quantize non-finite value");
  }

  const CounterRng rng(seed);
  QuantizedBlock block;
  block.kind = kind;
  block.bits = bits;
  block.cids.resize(values.size());

  if (kind == QuantizerKind::kPq) {
    double lo = 0.0, hi = 0.0;
    simd::active_kernels().min_max(values.data(), values.size(), &lo, &hi);
    block.meta.lo = round_down_to_float(lo);
    block.meta.hi = round_up_to_float(hi);
    const double flo = block.meta.lo;
    const double range = static_cast<double>(block.meta.hi) - flo;
    if (range <= 0.0) return block;  // all cids 0, decodes to lo
    const double top = pq_intervals(bits);
    const double per_unit = top / range;
    for (std::size_t i = 0; i < values.size(); ++i) {
      block.cids[i] = stochastic_round((values[i] - flo) * per_unit, top, rng.uniform(i));
    }
    return block;
  }

  const double norm = std::sqrt(simd::sum_squares(values));
  block.meta.l2_norm = round_up_to_float(norm);
  const double fnorm = block.meta.l2_norm;
  if (fnorm == 0.0) return block;
  if (bits == 1) {
    // Sign only: P(+norm) = (1 + v/norm) / 2 keeps the estimate unbiased.
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double p_plus = 0.5 * (1.0 + values[i] / fnorm);
      block.cids[i] = rng.uniform(i) < p_plus ? 1u : 0u;
    }
    return block;
  }
  const double top = qsgd_levels(bits);
  const std::uint32_t sign_bit = 1u << (bits - 1);  // set for non-negative values
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t level = stochastic_round(std::abs(values[i]) / fnorm * top, top, rng.uniform(i));
    block.cids[i] = (values[i] < 0.0 ? 0u : sign_bit) | level;
  }
  return block;
}

double centroid_value(QuantizerKind kind, const CentroidMeta& meta, int bits, std::uint32_t cid) {
  if (kind == QuantizerKind::kPq) {
    const double lo = meta.lo;
    const double range = static_cast<double>(meta.hi) - lo;
    if (range <= 0.0) return lo;
    return lo + static_cast<double>(cid) * (range / pq_intervals(bits));
  }
  const double norm = meta.l2_norm;
  if (bits == 1) return cid != 0 ? norm : -norm;
  const std::uint32_t sign_bit = 1u << (bits - 1);
  const double level = static_cast<double>(cid & (sign_bit - 1u));
  const double magnitude = level * norm / qsgd_levels(bits);
  return (cid & sign_bit) != 0 ? magnitude : -magnitude;
}

std::vector<double> dequantize(const QuantizedBlock& block) {
  check_bits(block.bits);
  std::vector<double> out(block.cids.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = centroid_value(block.kind, block.meta, block.bits, block.cids[i]);
  }
  return out;
}

double quant_error_model(QuantizerKind kind, std::int64_t count, int bits) {
  check_bits(bits);
  const double z = static_cast<double>(count);
  if (kind == QuantizerKind::kPq) {
    const double denom = pq_intervals(bits);
    return z / (denom * denom);
  }
  const double levels = std::ldexp(1.0, bits);
  return std::min(z / (levels * levels), std::sqrt(z) / levels);
}

double relaxed_error_model(ErrorModelBranch branch, double count, double bits) {
  const double levels = std::exp2(bits);
  switch (branch) {
    case ErrorModelBranch::kPq: {
      const double denom = levels - 1.0;
      return count / (denom * denom);
    }
    case ErrorModelBranch::kQsgdVariance:
      return count / (levels * levels);
    case ErrorModelBranch::kQsgdSqrt:
      return std::sqrt(count) / levels;
    case ErrorModelBranch::kQsgd:
      return std::min(count / (levels * levels), std::sqrt(count) / levels);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fedcvlc
