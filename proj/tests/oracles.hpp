#pragma once

// Test-only reference implementations: independent minimizers, root finders
// and grid searches that the library results are checked against. Nothing in
// here calls back into the solver's own search paths.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Golden-section minimizer of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      hi = d; d = c; fd = fc;
      c = hi - gr * (hi - lo); fc = f(c);
    } else {
      lo = c; c = d; fc = fd;
      d = lo + gr * (hi - lo); fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

/// Bisection for a sign change of f on [lo, hi]; f(lo) and f(hi) must differ
/// in sign.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) { lo = mid; flo = fm; }
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Minimizer of a smooth strictly-unimodal function via the sign of a
/// long-double centered difference; localizes far below the flatness limit of
/// value-comparison searches.
inline double slope_bisect_min(const std::function<long double(long double)>& f, double lo,
                               double hi) {
  const auto slope = [&](long double x) {
    const long double step = x * 1e-7L + 1e-300L;
    return f(x + step) - f(x - step);
  };
  // golden first to get a slope bracket
  double a = golden_min([&](double x) { return static_cast<double>(f(x)); }, lo, hi, 80);
  long double llo = a, lhi = a;
  long double w = a * 0.5L + 1e-12L;
  while (slope(static_cast<long double>(llo)) > 0 && llo > lo) llo = std::max<long double>(lo, llo - w), w *= 2;
  w = a * 0.5L + 1e-12L;
  while (slope(static_cast<long double>(lhi)) < 0 && lhi < hi) lhi = std::min<long double>(hi, lhi + w), w *= 2;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (llo + lhi);
    (slope(mid) < 0 ? llo : lhi) = mid;
  }
  return static_cast<double>(0.5L * (llo + lhi));
}

/// All compositions of `total` into `parts` non-negative integers.
inline void compositions(int total, int parts, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> c(parts, 0);
  c[0] = total;
  for (;;) {
    visit(c);
    int j = 0;
    while (j + 1 < parts && c[j] == 0) ++j;
    if (j + 1 >= parts) return;
    const int carry = c[j];
    c[j] = 0;
    c[j + 1] += 1;
    c[0] = carry - 1;
  }
}

}  // namespace oracle
