#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference and, where the
// target supports it, an AVX2 variant; the variant is picked once at runtime.
//
// Elementwise kernels (axpy, scale_add, pair_argmin) are bit-identical across
// variants. Reductions (sum_squares, squared_distance, dot) use a different
// summation order in the SIMD variant and agree to rounding.

#include <cstddef>
#include <cstdint>
#include <span>

namespace fedcvlc::simd {

enum class Isa { kScalar, kAvx2 };

const char* to_string(Isa isa);

// Objective of the two-packet re-split scanned by pair_argmin:
//   f(p) = coef[p] * (z_right - zpow[base + X - p])
//        + coef[X - p] * (zpow[base + X - p] - z_left)
// for p in [p_lo, p_hi]. `base` is the prefix count before the left packet.
struct PairScanArgs {
  const double* coef = nullptr;  // indexed by packet size
  const double* zpow = nullptr;  // indexed by prefix count
  std::int64_t total = 0;        // X = P_left + P_right
  std::int64_t base = 0;         // Z_{r-2}
  std::int64_t p_lo = 0;         // inclusive range of P_right
  std::int64_t p_hi = -1;
  double z_left = 0.0;           // zpow at base (1 when base == 0)
  double z_right = 0.0;          // zpow at base + X
};

struct PairScanResult {
  double value;
  std::int64_t p_right;  // -1 when the range is empty
};

struct KernelTable {
  Isa isa;
  double (*sum_squares)(const double* x, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*min_max)(const double* x, std::size_t n, double* lo, double* hi);
  // argmin of the pair objective; ties resolve to the smallest p.
  PairScanResult (*pair_argmin)(const PairScanArgs& args);
};

const KernelTable& scalar_kernels();

// nullptr when the binary was built without AVX2 or the CPU lacks it.
const KernelTable* avx2_kernels();

// Selected once: AVX2 when available unless VLC_SIMD=scalar.
const KernelTable& active_kernels();

inline double sum_squares(std::span<const double> x) {
  return active_kernels().sum_squares(x.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active_kernels().squared_distance(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace fedcvlc::simd
