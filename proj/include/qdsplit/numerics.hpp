#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace qdsplit::numerics {

/// Number of interior samples used to bracket roots of a dispersion function.
inline constexpr int kScanPoints = 10000;

/// Bisects a sign change of `f` on [lo, hi] down to the resolution of
/// double precision. `f_lo` is f(lo). Returns whichever final endpoint has the
/// smaller |f|.
template <class F>
double bisect(F&& f, double lo, double hi, double f_lo) {
  double f_hi = f(hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
}

/// Samples `f` at `points` interior points of the open interval (lo, hi) and
/// refines every sign change by bisection. Roots come back in descending order.
/// A root pair that falls inside one sampling cell produces no sign change and
/// is not reported.
template <class F>
std::vector<double> scan_roots(F&& f, double lo, double hi, int points = kScanPoints) {
  std::vector<double> roots;
  if (!(hi > lo) || points < 2) return roots;
  const double step = (hi - lo) / (points + 1);
  // walk downward so roots are produced highest first
  double x_prev = hi - step;
  double f_prev = f(x_prev);
  if (f_prev == 0.0) roots.push_back(x_prev);
  for (int j = points - 1; j >= 1; --j) {
    const double x = lo + step * j;
    const double fx = f(x);
    if (fx == 0.0) {
      roots.push_back(x);
    } else if (f_prev != 0.0 && ((fx < 0.0) != (f_prev < 0.0))) {
      roots.push_back(bisect(f, x, x_prev, fx));
    }
    x_prev = x;
    f_prev = fx;
  }
  return roots;
}

/// Like scan_roots for an effective-index residual on (lo, hi), but the
/// samples are the union of a grid uniform in n and one uniform in the
/// transverse index sqrt(hi^2 - n^2). Modes of thick cores crowd against hi in
/// n; modes near cutoff crowd against lo in the transverse index. The walk is
/// downward from hi and stops after `max_roots` roots.
template <class F>
std::vector<double> scan_index_roots(F&& f, double lo, double hi,
                                     std::size_t max_roots = static_cast<std::size_t>(-1),
                                     int points = kScanPoints) {
  std::vector<double> roots;
  if (!(hi > lo) || points < 2) return roots;
  const double u_max = std::sqrt((hi - lo) * (hi + lo));
  // both grids are generated in descending order, so a merge suffices
  std::vector<double> uniform_n, uniform_u;
  uniform_n.reserve(static_cast<std::size_t>(points));
  uniform_u.reserve(static_cast<std::size_t>(points));
  for (int j = points; j >= 1; --j) uniform_n.push_back(lo + (hi - lo) * j / (points + 1));
  for (int j = 1; j <= points; ++j) {
    const double u = u_max * j / (points + 1);
    uniform_u.push_back(std::sqrt((hi - u) * (hi + u)));
  }
  std::vector<double> xs(2 * static_cast<std::size_t>(points));
  std::merge(uniform_n.begin(), uniform_n.end(), uniform_u.begin(), uniform_u.end(), xs.begin(),
             std::greater<>());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  while (!xs.empty() && !(xs.back() > lo)) xs.pop_back();
  if (xs.empty()) return roots;
  double x_prev = xs.front();
  double f_prev = f(x_prev);
  if (f_prev == 0.0) roots.push_back(x_prev);
  for (std::size_t j = 1; j < xs.size() && roots.size() < max_roots; ++j) {
    const double x = xs[j];
    if (!(x < hi)) continue;
    const double fx = f(x);
    if (fx == 0.0) {
      roots.push_back(x);
    } else if (f_prev != 0.0 && ((fx < 0.0) != (f_prev < 0.0))) {
      roots.push_back(bisect(f, x, x_prev, fx));
    }
    x_prev = x;
    f_prev = fx;
  }
  return roots;
}

/// Runs `body(i)` for i in [0, n) across hardware threads. Each index is
/// visited exactly once; callers write results into index-addressed slots.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n, 1));
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

/// Evenly spaced grid with `steps` points from `first` to `last` inclusive.
inline std::vector<double> linspace(double first, double last, std::size_t steps) {
  std::vector<double> out;
  if (steps == 0) return out;
  if (steps == 1) return {first};
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i)
    out.push_back(first + (last - first) * static_cast<double>(i) / static_cast<double>(steps - 1));
  return out;
}

}  // namespace qdsplit::numerics
