#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <utility>

namespace chatterlab::numerics {

// (1 - e^{-x}) / x with the removable singularity at 0 filled in.
inline double one_minus_exp_ratio(double x) {
  if (x == 0.0) return 1.0;
  return -std::expm1(-x) / x;
}

// \int_0^t e^{-a s} ds, valid for a = 0.
inline double decay_integral(double a, double t) {
  return t * one_minus_exp_ratio(a * t);
}

// (e^{-a t} - e^{-b t}) / (b - a), symmetric in (a, b) and exact at a = b.
inline double exp_gap(double a, double b, double t) {
  const double lo = std::min(a, b);
  const double gap = std::abs(b - a);
  return std::exp(-lo * t) * t * one_minus_exp_ratio(gap * t);
}

// Bisection on a predicate that is true at lo and false at hi.
// Returns the boundary to full double resolution.
template <class Pred>
double bisect_predicate(Pred&& inside, double lo, double hi, int max_iter = 400) {
  for (int i = 0; i < max_iter; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (inside(mid)) lo = mid; else hi = mid;
  }
  return lo + 0.5 * (hi - lo);
}

// Final [lo, hi] of a bisection with inside(lo) true and inside(hi) false.
template <class Pred>
std::pair<double, double> bisect_bracket(Pred&& inside, double lo, double hi, int max_iter = 400) {
  for (int i = 0; i < max_iter; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (inside(mid)) lo = mid; else hi = mid;
  }
  return {lo, hi};
}

// Root of f on [lo, hi] given f(lo) and f(hi) of opposite sign (or zero).
template <class F>
double bisect_root(F&& f, double lo, double hi, int max_iter = 400) {
  const bool lo_positive = f(lo) > 0.0;
  return bisect_predicate([&](double t) { return (f(t) > 0.0) == lo_positive; }, lo, hi, max_iter);
}

inline double round_significant(double v, int digits = 9) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

}  // namespace chatterlab::numerics
