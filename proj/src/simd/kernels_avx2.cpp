#include <immintrin.h>

#include <limits>

#include "kernels_internal.hpp"

namespace fedcvlc::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

double hsum(__m256d v) {
  alignas(32) double tmp[kLanes];
  _mm256_store_pd(tmp, v);
  return (tmp[0] + tmp[1]) + (tmp[2] + tmp[3]);
}

// Lanes 3,2,1,0 -> 0,1,2,3.
inline __m256d reverse(__m256d v) { return _mm256_permute4x64_pd(v, 0x1B); }

double sum_squares(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i] * x[i];
  return total;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + kLanes),
                                             _mm256_loadu_pd(b + i + kLanes)));
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void min_max(const double* x, std::size_t n, double* lo, double* hi) {
  __m256d vmin = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d vmax = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    vmin = _mm256_min_pd(vmin, v);
    vmax = _mm256_max_pd(vmax, v);
  }
  alignas(32) double mins[kLanes];
  alignas(32) double maxs[kLanes];
  _mm256_store_pd(mins, vmin);
  _mm256_store_pd(maxs, vmax);
  double mn = mins[0];
  double mx = maxs[0];
  for (std::size_t l = 1; l < kLanes; ++l) {
    mn = mins[l] < mn ? mins[l] : mn;
    mx = maxs[l] > mx ? maxs[l] : mx;
  }
  for (; i < n; ++i) {
    mn = x[i] < mn ? x[i] : mn;
    mx = x[i] > mx ? x[i] : mx;
  }
  *lo = mn;
  *hi = mx;
}

PairScanResult pair_argmin(const PairScanArgs& a) {
  if (a.p_hi < a.p_lo) return {std::numeric_limits<double>::infinity(), -1};

  const __m256d z_right = _mm256_set1_pd(a.z_right);
  const __m256d z_left = _mm256_set1_pd(a.z_left);
  const __m256d lane_offsets = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  __m256d best_v = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d best_p = _mm256_set1_pd(-1.0);

  std::int64_t p = a.p_lo;
  for (; p + static_cast<std::int64_t>(kLanes) - 1 <= a.p_hi; p += kLanes) {
    // Left-packet quantities run backwards as p increases.
    const std::int64_t left_first = a.total - p - 3;
    const __m256d coef_r = _mm256_loadu_pd(a.coef + p);
    const __m256d coef_l = reverse(_mm256_loadu_pd(a.coef + left_first));
    const __m256d mid = reverse(_mm256_loadu_pd(a.zpow + a.base + left_first));
    const __m256d f = _mm256_add_pd(_mm256_mul_pd(coef_r, _mm256_sub_pd(z_right, mid)),
                                    _mm256_mul_pd(coef_l, _mm256_sub_pd(mid, z_left)));
    const __m256d better = _mm256_cmp_pd(f, best_v, _CMP_LT_OQ);
    const __m256d pv = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(p)), lane_offsets);
    best_v = _mm256_blendv_pd(best_v, f, better);
    best_p = _mm256_blendv_pd(best_p, pv, better);
  }

  alignas(32) double vals[kLanes];
  alignas(32) double ps[kLanes];
  _mm256_store_pd(vals, best_v);
  _mm256_store_pd(ps, best_p);
  PairScanResult best{std::numeric_limits<double>::infinity(), -1};
  for (std::size_t l = 0; l < kLanes; ++l) {
    if (ps[l] < 0.0) continue;
    const auto lp = static_cast<std::int64_t>(ps[l]);
    if (best.p_right < 0 || vals[l] < best.value || (vals[l] == best.value && lp < best.p_right)) {
      best = {vals[l], lp};
    }
  }
  for (; p <= a.p_hi; ++p) {
    const double mid = a.zpow[a.base + a.total - p];
    const double f = a.coef[p] * (a.z_right - mid) + a.coef[a.total - p] * (mid - a.z_left);
    if (f < best.value || best.p_right < 0) best = {f, p};
  }
  return best;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::kAvx2, sum_squares, squared_distance, dot,
                                 axpy,       min_max,     pair_argmin};
  return table;
}

}  // namespace fedcvlc::simd::detail
