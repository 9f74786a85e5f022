#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedcvlc {

enum class QuantizerKind : std::uint8_t { kPq = 0, kQsgd = 1 };

const char* to_string(QuantizerKind kind);
QuantizerKind parse_quantizer_kind(std::string_view name);  // "pq" | "qsgd"

// PQ carries the block range; QSGD carries the block l2 norm. Both are stored
// as binary32 on the wire, so quantize() rounds them outward to floats first.
struct CentroidMeta {
  float lo = 0.0f;
  float hi = 0.0f;
  float l2_norm = 0.0f;

  bool operator==(const CentroidMeta&) const = default;
};

struct QuantizedBlock {
  QuantizerKind kind = QuantizerKind::kPq;
  int bits = 1;
  std::vector<std::uint32_t> cids;
  CentroidMeta meta;
};

inline constexpr int kMinCodeBits = 1;
inline constexpr int kMaxCodeBits = 32;

// Unbiased stochastic quantization of `values` to `bits`-bit centroid IDs.
//
// PQ: 2^bits centroids evenly spaced on [lo, hi]; each value rounds to one of
// its two bracketing centroids with probability proportional to proximity.
//
// QSGD: a sign bit (high bit, set when the value is non-negative) plus
// (bits-1) bits of magnitude level, levels evenly spaced on [0, l2_norm]. With bits == 1 there is no level field and the value
// rounds stochastically to +l2_norm or -l2_norm.
//
// The random draw for element i is CounterRng(seed).uniform(i).
QuantizedBlock quantize(QuantizerKind kind, std::span<const double> values, int bits,
                        std::uint64_t seed);

std::vector<double> dequantize(const QuantizedBlock& block);

// Centroid value for one code; dequantize() is this applied elementwise.
double centroid_value(QuantizerKind kind, const CentroidMeta& meta, int bits, std::uint32_t cid);

// Analytic relative error Q(z, y): E||Q(v) - v||^2 <= Q * ||v||^2.
//   PQ:   z / (2^y - 1)^2
//   QSGD: min(z / 2^(2y), sqrt(z) / 2^y)
double quant_error_model(QuantizerKind kind, std::int64_t count, int bits);

// The same error models with a real-valued code length, as used when the
// per-packet bit count is treated as (b - H)/P - s without flooring.
enum class ErrorModelBranch {
  kPq,
  kQsgd,          // min of the two bounds below
  kQsgdVariance,  // z / 2^(2y)
  kQsgdSqrt,      // sqrt(z) / 2^y
};

double relaxed_error_model(ErrorModelBranch branch, double count, double bits);

}  // namespace fedcvlc
