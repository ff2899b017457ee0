#pragma once

// Independent reference computations used only by the tests. None of these
// call into the code path they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

/// rho_n(v) = max_{i <= n} w(i) |v_i| over a raw 1-based coefficient list.
inline double prefix_sup(const std::vector<double>& v, std::size_t n,
                         const std::function<double(std::size_t)>& w = [](std::size_t) { return 1.0; }) {
  double m = 0.0;
  for (std::size_t i = 1; i <= n && i <= v.size(); ++i) m = std::max(m, w(i) * std::abs(v[i - 1]));
  return m;
}

/// max over n <= deg + extra of alpha(n) rho_n / (1 + rho_n): the standard
/// metric's sup by term enumeration.
inline double standard_norm(const std::vector<double>& v, const std::function<double(std::size_t)>& alpha,
                            std::size_t extra = 64,
                            const std::function<double(std::size_t)>& w = [](std::size_t) { return 1.0; }) {
  std::size_t deg = v.size();
  while (deg > 0 && v[deg - 1] == 0.0) --deg;
  double best = 0.0;
  for (std::size_t n = 1; n <= deg + extra; ++n) {
    const double r = prefix_sup(v, n, w);
    best = std::max(best, alpha(n) * (r / (1.0 + r)));
  }
  return best;
}

/// Root of a strictly increasing scalar function on [lo, hi] by bisection.
inline double bisect_increasing(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Partial sums of the exponential series, sum_{k<=n} t^k / k!.
inline double exp_partial_sum(double t, int n) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= n; ++k) {
    term *= t / k;
    sum += term;
  }
  return sum;
}

/// Five-point central difference of a scalar function.
inline double five_point(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

}  // namespace oracle
