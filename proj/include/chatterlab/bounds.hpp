#pragma once

#include <cmath>

#include "core_model.hpp"
#include "errors.hpp"

namespace chatterlab {

/**
 * @brief Magnitude bounds on the forcing term Psi(t) of the I1 queue
 * difference, so that -upper <= Psi(t) <= -lower.
 *
 * `printed_lower` is 2 mu - (1 - mu)(1 - tau), which is not a valid bound and
 * is nonpositive for small mu; it is returned for reporting only.
 */
struct PsiBounds {
  double lower{0.0};
  double upper{2.0};
  // -Psi(t) >= lower for every t, tightened using the actual z21(0).
  double upper_for_start{2.0};
  double printed_lower{0.0};
  bool printed_lower_nonpositive{false};
};

inline PsiBounds psi_bounds(const ModelParams& p, double z21_0 = 0.0) {
  if (!(z21_0 >= 0.0 && z21_0 <= 1.0)) throw precondition_error("psi_bounds: z21(0) outside [0,1]");
  PsiBounds b;
  b.lower = (1.0 + p.mu) - (1.0 - p.mu) * p.tau;
  b.upper = 2.0;
  b.upper_for_start = (1.0 + p.mu) + (1.0 - p.mu) * (1.0 - z21_0);
  b.printed_lower = 2.0 * p.mu - (1.0 - p.mu) * (1.0 - p.tau);
  b.printed_lower_nonpositive = b.printed_lower <= 0.0;
  return b;
}

// Psi(t) = -(1+mu) - (1-mu)(1 - z21(0)) e^{-t} + (1-mu) z12(0) e^{-mu t}.
inline double psi(double t, double z21_0, double z12_0, const ModelParams& p) {
  return -(1.0 + p.mu) - (1.0 - p.mu) * (1.0 - z21_0) * std::exp(-t) +
         (1.0 - p.mu) * z12_0 * std::exp(-p.mu * t);
}

struct TimeBounds {
  double lower{0.0};
  double upper{0.0};
};

namespace detail {
// Time for Delta to fall from delta0 to kappa under constant drift -rate and decay theta.
inline double decay_time(double delta0, double rate, const ModelParams& p) {
  const double gap = delta0 - p.kappa;
  if (p.theta == 0.0) return gap / rate;
  return std::log1p(p.theta * gap / (p.theta * p.kappa + rate)) / p.theta;
}
}  // namespace detail

/**
 * @brief Bracket [T1 lower, T1 upper] for the first time Delta reaches kappa.
 *
 * The lower end uses the fastest drift (2), the upper end the slowest
 * ((1+mu) - (1-mu) tau). theta = 0 uses the linear limit forms.
 */
inline TimeBounds t1_bounds(double delta0, const ModelParams& p) {
  if (delta0 < p.kappa) throw precondition_error("t1_bounds: Delta(0) must be at least kappa");
  const auto b = psi_bounds(p);
  return {detail::decay_time(delta0, b.upper, p), detail::decay_time(delta0, b.lower, p)};
}

}  // namespace chatterlab
