#include <limits>

#include "kernels_internal.hpp"

namespace fedcvlc::simd::detail {
namespace {

double sum_squares(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void min_max(const double* x, std::size_t n, double* lo, double* hi) {
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    mn = x[i] < mn ? x[i] : mn;
    mx = x[i] > mx ? x[i] : mx;
  }
  *lo = mn;
  *hi = mx;
}

PairScanResult pair_argmin(const PairScanArgs& a) {
  PairScanResult best{std::numeric_limits<double>::infinity(), -1};
  for (std::int64_t p = a.p_lo; p <= a.p_hi; ++p) {
    const double mid = a.zpow[a.base + a.total - p];
    const double f = a.coef[p] * (a.z_right - mid) + a.coef[a.total - p] * (mid - a.z_left);
    if (f < best.value || best.p_right < 0) best = {f, p};
  }
  return best;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, sum_squares, squared_distance, dot,
                                 axpy,         min_max,     pair_argmin};
  return table;
}

}  // namespace fedcvlc::simd::detail
