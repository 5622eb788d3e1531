#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace chatterlab {

// Absolute tolerance for threshold equalities (z12 = tau, Delta = kappa).
inline constexpr double kStateTol = 1e-9;

/**
 * @brief Symmetric fluid parameters.
 *
 * The designated service rate is normalised to 1; mu is the rate of a
 * customer served by the other pool. theta = 0 is accepted as limit mode.
 */
struct ModelParams {
  double lambda{0.0};
  double mu{0.0};
  double theta{0.0};
  double kappa{0.0};
  double tau{0.0};

  bool operator==(const ModelParams&) const = default;
};

/**
 * @brief Fluid state (q1, q2, z11, z12, z21, z22).
 *
 * z_ij is the mass of class-i fluid in service in pool j.
 */
struct StateVector {
  double q1{0.0};
  double q2{0.0};
  double z11{0.0};
  double z12{0.0};
  double z21{0.0};
  double z22{0.0};

  double delta() const { return q2 - q1; }
  double d12(double kappa) const { return q1 - q2 - kappa; }
  double d21(double kappa) const { return q2 - q1 - kappa; }

  bool pools_full(double tol = kStateTol) const {
    return std::abs(z11 + z21 - 1.0) <= tol && std::abs(z22 + z12 - 1.0) <= tol;
  }

  std::array<double, 6> as_array() const { return {q1, q2, z11, z12, z21, z22}; }

  static StateVector from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  bool operator==(const StateVector&) const = default;
};

// Max-norm distance over the six coordinates.
inline double sup_distance(const StateVector& a, const StateVector& b) {
  const auto x = a.as_array();
  const auto y = b.as_array();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

// Label reversal: swaps the roles of class/pool 1 and 2.
inline StateVector mirror(const StateVector& x) {
  return {x.q2, x.q1, x.z22, x.z21, x.z12, x.z11};
}

enum class Phase { interval1, interval2, interval3, interval4, relaxation, sliding_detected };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::interval1: return "I1";
    case Phase::interval2: return "I2";
    case Phase::interval3: return "I3";
    case Phase::interval4: return "I4";
    case Phase::relaxation: return "relaxation";
    case Phase::sliding_detected: return "sliding";
  }
  return "?";
}

inline Phase phase_from_string(std::string_view s) {
  if (s == "I1") return Phase::interval1;
  if (s == "I2") return Phase::interval2;
  if (s == "I3") return Phase::interval3;
  if (s == "I4") return Phase::interval4;
  if (s == "relaxation") return Phase::relaxation;
  if (s == "sliding") return Phase::sliding_detected;
  throw precondition_error("unknown phase label '" + std::string(s) + "'");
}

struct ValidationReport {
  bool valid{true};
  // Violations that make the parameters unusable under the requested mode.
  std::vector<std::string> violations;
  // Assumption failures tolerated in limit mode.
  std::vector<std::string> warnings;
};

/**
 * @brief Checks the parameter constraints.
 *
 * Hard constraints (0 < lambda < 1, 0 < mu < 1, theta >= 0, kappa > 0,
 * 0 < tau < 1) always apply. The overload assumptions lambda <= 1 - tau,
 * theta < mu and theta > 0 are violations in strict mode and warnings
 * otherwise.
 */
inline ValidationReport validate_params(const ModelParams& p, bool strict) {
  ValidationReport r;
  auto hard = [&](bool ok, const std::string& msg) {
    if (!ok) r.violations.push_back(msg);
  };
  const bool finite = std::isfinite(p.lambda) && std::isfinite(p.mu) && std::isfinite(p.theta) &&
                      std::isfinite(p.kappa) && std::isfinite(p.tau);
  hard(finite, "all parameters must be finite");
  if (finite) {
    hard(p.lambda > 0.0, "lambda > 0");
    hard(p.lambda < 1.0, "lambda < 1");
    hard(p.mu > 0.0, "mu > 0");
    hard(p.mu < 1.0, "mu < 1");
    hard(p.theta >= 0.0, "theta >= 0");
    hard(p.kappa > 0.0, "kappa > 0");
    hard(p.tau > 0.0, "tau > 0");
    hard(p.tau < 1.0, "tau < 1");

    auto soft = [&](bool ok, const std::string& msg) {
      if (ok) return;
      if (strict) r.violations.push_back(msg); else r.warnings.push_back(msg);
    };
    soft(p.lambda <= 1.0 - p.tau, "lambda <= 1 - tau");
    soft(p.theta < p.mu, "theta < mu");
    soft(p.theta > 0.0, "theta > 0 (theta = 0 is limit mode)");
  }
  r.valid = r.violations.empty();
  return r;
}

// Throws precondition_error unless the hard constraints hold.
inline void require_valid(const ModelParams& p) {
  const auto r = validate_params(p, false);
  if (r.valid) return;
  std::string msg = "invalid parameters:";
  for (const auto& v : r.violations) msg += " [" + v + "]";
  throw precondition_error(msg);
}

struct InitialConditionCheck {
  bool ok{true};
  std::vector<std::string> diagnostics;
  explicit operator bool() const { return ok; }
};

/**
 * @brief Tests the cycle start condition: q1 > 0, q2 > q1 + kappa,
 * z12 = tau, 0 <= z21 < tau, both pools full.
 */
inline InitialConditionCheck check_initial_condition(const StateVector& x, const ModelParams& p) {
  InitialConditionCheck c;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) {
      c.ok = false;
      c.diagnostics.push_back(msg);
    }
  };
  need(x.q1 > 0.0, "q1 > 0");
  // Within kStateTol of the threshold counts as on it, not above it.
  need(x.delta() > p.kappa + kStateTol, "q2 > q1 + kappa");
  need(std::abs(x.z12 - p.tau) <= kStateTol, "z12 = tau");
  need(x.z21 >= 0.0 && x.z21 < p.tau, "0 <= z21 < tau");
  need(x.pools_full(), "both pools full (z11 + z21 = 1, z22 + z12 = 1)");
  return c;
}

// Occupancies in [0,1], queues nonnegative, pool totals at most 1.
inline void require_well_formed(const StateVector& x, const char* what) {
  const auto a = x.as_array();
  for (double v : a) {
    if (!std::isfinite(v)) throw precondition_error(std::string(what) + ": non-finite coordinate");
  }
  if (x.q1 < 0.0 || x.q2 < 0.0) throw precondition_error(std::string(what) + ": negative queue");
  for (std::size_t i = 2; i < 6; ++i) {
    if (a[i] < -kStateTol || a[i] > 1.0 + kStateTol)
      throw precondition_error(std::string(what) + ": occupancy outside [0,1]");
  }
  if (x.z11 + x.z21 > 1.0 + kStateTol || x.z22 + x.z12 > 1.0 + kStateTol)
    throw precondition_error(std::string(what) + ": pool occupancy exceeds capacity");
}

}  // namespace chatterlab
