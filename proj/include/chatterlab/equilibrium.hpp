#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "core_model.hpp"
#include "errors.hpp"
#include "fluid_engine.hpp"
#include "numerics.hpp"

namespace chatterlab {

enum class Verdict { oscillatory, stationary_convergent, undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::oscillatory: return "Oscillatory";
    case Verdict::stationary_convergent: return "StationaryConvergent";
    case Verdict::undetermined: return "Undetermined";
  }
  return "?";
}

/**
 * @brief Periodic solution found by the cycle iteration.
 *
 * state_at_switch is empty for the approximating system, whose queues are
 * not part of the reduced map.
 */
struct PeriodicEquilibrium {
  double delta_star{0.0};
  double z21_star{0.0};
  double z_at_T1{0.0};
  std::vector<StateVector> state_at_switch;
  std::array<double, 4> T_star{};
  double period{0.0};
  // Residual on the components used for convergence.
  double closure_residual{0.0};
  // Residual including queue lengths; meaningful only when queues are bounded.
  double closure_residual_full{0.0};
};

struct ClassificationResult {
  Verdict verdict{Verdict::undetermined};
  std::optional<PeriodicEquilibrium> periodic;
  int iterations_used{0};
  std::string stop_reason;
  // Queue difference at successive half-cycle starts, starting with the input.
  std::vector<double> delta_history;
  // Fluid states at successive half-cycle starts (cycle iteration only).
  std::vector<StateVector> start_history;
  // Indices into delta_history produced by extrapolation rather than the map.
  std::vector<std::size_t> accelerated;
};

inline StateVector stationary_point(const ModelParams& p) {
  return {0.0, 0.0, p.lambda, 0.0, 0.0, p.lambda};
}

// Cycle start built from the reduced triple: z12 = tau, pools full.
inline StateVector cycle_start(double q1, double q2, double z21, const ModelParams& p) {
  return {q1, q2, 1.0 - z21, p.tau, z21, 1.0 - p.tau};
}

// Width of the interval (kappa, kappa + eps) whose starts cannot sustain oscillation.
inline double epsilon_guard(const ModelParams& p) { return -std::log1p(-p.tau); }

namespace detail {

inline double closure_gap(const StateVector& a, const StateVector& b, bool with_queues) {
  double g = std::max({std::abs(a.delta() - b.delta()), std::abs(a.z11 - b.z11), std::abs(a.z12 - b.z12),
                       std::abs(a.z21 - b.z21), std::abs(a.z22 - b.z22)});
  if (with_queues) g = std::max({g, std::abs(a.q1 - b.q1), std::abs(a.q2 - b.q2)});
  return g;
}

inline PeriodicEquilibrium assemble_equilibrium(const StateVector& x0, const ModelParams& p) {
  const HalfCycle a = half_cycle_general(x0, p);
  StateVector x2 = mirror(a.at_sigma2);
  x2.z12 = std::min(x2.z12, p.tau);
  const HalfCycle b = half_cycle_general(x2, p);
  PeriodicEquilibrium e;
  e.delta_star = x0.delta();
  e.z21_star = x0.z21;
  e.z_at_T1 = a.at_sigma1.z21;
  e.T_star = {a.T1, a.T2, b.T1, b.T2};
  e.state_at_switch = {x0, a.at_sigma1, a.at_sigma2, mirror(b.at_sigma1), mirror(b.at_sigma2)};
  e.period = a.T1 + a.T2 + b.T1 + b.T2;
  const bool bounded_queues = p.theta > 0.0;
  // Sigma_2 mirrored must match Sigma_0, and Sigma_4 must match Sigma_0.
  e.closure_residual = std::max(closure_gap(mirror(a.at_sigma2), x0, bounded_queues),
                                closure_gap(mirror(b.at_sigma2), x0, bounded_queues));
  e.closure_residual_full = std::max(closure_gap(mirror(a.at_sigma2), x0, true),
                                     closure_gap(mirror(b.at_sigma2), x0, true));
  return e;
}

}  // namespace detail

/**
 * @brief Iterates half cycles with label reversal from (q1, q2, z21).
 *
 * Converges on (Delta, z21) when theta = 0 (queues grow without bound) and
 * on (Delta, z21, q1) when theta > 0. Starts inside the epsilon guard are
 * still run to confirm the stop.
 */
inline ClassificationResult iterate_periodic(double q1, double q2, double z21, const ModelParams& p,
                                             double tol = 1e-9, int max_iter = 200) {
  require_valid(p);
  StateVector x = cycle_start(q1, q2, z21, p);
  const auto check = check_initial_condition(x, p);
  if (!check) {
    std::string msg = "iterate_periodic: invalid start:";
    for (const auto& d : check.diagnostics) msg += " [" + d + "]";
    throw precondition_error(msg);
  }
  if (!(tol > 0.0) || max_iter < 1) throw precondition_error("iterate_periodic: tol > 0 and max_iter >= 1 required");

  ClassificationResult r;
  r.delta_history.push_back(x.delta());
  r.start_history.push_back(x);
  const bool guarded = x.delta() < p.kappa + epsilon_guard(p);
  const std::string guard_note = guarded ? " (start lies inside the epsilon guard)" : "";

  for (int k = 1; k <= max_iter; ++k) {
    const HalfCycle hc = detail::half_cycle_general(x, p);
    r.iterations_used = k;
    if (hc.outcome == CycleOutcome::queue_hit_zero) {
      r.verdict = Verdict::stationary_convergent;
      r.stop_reason = "a queue emptied during the release interval of iteration " + std::to_string(k) + guard_note;
      return r;
    }
    if (hc.outcome == CycleOutcome::oscillation_failed) {
      r.verdict = Verdict::stationary_convergent;
      r.stop_reason = "reverse sharing not activated at the end of iteration " + std::to_string(k) + guard_note;
      r.delta_history.push_back(-hc.at_sigma2.delta());
      return r;
    }
    StateVector next = mirror(hc.at_sigma2);
    next.z12 = p.tau;
    r.delta_history.push_back(next.delta());
    r.start_history.push_back(next);
    double change = std::max(std::abs(next.delta() - x.delta()), std::abs(next.z21 - x.z21));
    if (p.theta > 0.0) change = std::max(change, std::abs(next.q1 - x.q1));
    x = next;
    if (change < tol) {
      r.verdict = Verdict::oscillatory;
      r.periodic = detail::assemble_equilibrium(x, p);
      r.stop_reason = "cycle-start values changed by less than tolerance";
      return r;
    }
  }
  r.verdict = Verdict::undetermined;
  r.stop_reason = "iteration limit reached";
  return r;
}

struct Interval {
  double lo{0.0};
  double hi{0.0};
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
};

struct CertificateStep {
  Interval delta;
  Interval q1;
};

/**
 * @brief Sufficient conditions for endless oscillation over a box of
 * starts (Delta(0) in delta_bounds, q1(0) in q1_bounds, z21(0) in [0, tau)).
 */
struct OscillationCertificate {
  Interval delta_bounds;
  Interval q1_bounds;
  PsiBounds psi;
  Interval t1_bounds;
  Interval z21_at_T1;
  Interval t2_bounds;
  Interval z12_at_sigma2;
  Interval A_bounds;
  // (1 - mu)(tau - 1): the box-independent upper bound on A.
  double A_upper_constant{0.0};
  Interval delta_next_bounds;
  // kappa e^{-theta T2U} - A_const (e^{-theta T2U} - e^{-mu T2U})/(mu - theta), as printed.
  double delta_next_lower_printed{0.0};
  double q1_at_T1_lower{0.0};
  Interval q_next_bounds;
  // q1L(T1) e^{-theta T2U}, the printed next-queue estimate without the drain term.
  double q_next_lower_printed{0.0};
  bool release_condition{false};
  bool queue_positivity{false};
  bool A_negative{false};
  bool contained{false};
  bool verdict{false};
  std::vector<CertificateStep> nested_bounds_trace;
};

namespace detail {

// Range of (e^{-theta t} - e^{-mu t})/(mu - theta) over [a, b]; the function is unimodal.
inline Interval exp_gap_range(double a, double b, const ModelParams& p) {
  auto g = [&](double t) { return numerics::exp_gap(p.theta, p.mu, t); };
  Interval r{std::min(g(a), g(b)), std::max(g(a), g(b))};
  double peak = std::numeric_limits<double>::infinity();
  if (p.theta > 0.0) {
    peak = p.theta == p.mu ? 1.0 / p.mu : std::log(p.mu / p.theta) / (p.mu - p.theta);
  }
  if (peak > a && peak < b) r.hi = g(peak);
  return r;
}

inline OscillationCertificate certify_box(const Interval& d, const Interval& q, const ModelParams& p) {
  using numerics::decay_integral;
  OscillationCertificate c;
  c.delta_bounds = d;
  c.q1_bounds = q;
  c.psi = psi_bounds(p);
  c.A_upper_constant = (1.0 - p.mu) * (p.tau - 1.0);
  const double pl = c.psi.lower;
  const double pu = c.psi.upper;

  c.t1_bounds = {decay_time(d.lo, pu, p), decay_time(d.hi, pl, p)};
  c.z21_at_T1 = {-std::expm1(-c.t1_bounds.lo), 1.0 - (1.0 - p.tau) * std::exp(-c.t1_bounds.hi)};
  c.release_condition = c.z21_at_T1.lo > p.tau;
  if (!c.release_condition) return c;

  c.t2_bounds = {std::log(c.z21_at_T1.lo / p.tau) / p.mu, std::log(c.z21_at_T1.hi / p.tau) / p.mu};
  const double t2l = c.t2_bounds.lo;
  const double t2u = c.t2_bounds.hi;
  c.z12_at_sigma2 = {p.tau * std::exp(-p.mu * (c.t1_bounds.hi + t2u)),
                     p.tau * std::exp(-p.mu * (c.t1_bounds.lo + t2l))};

  const double z12_t1_lo = p.tau * std::exp(-p.mu * c.t1_bounds.hi);
  const double z12_t1_hi = p.tau * std::exp(-p.mu * c.t1_bounds.lo);
  c.A_bounds = {(1.0 - p.mu) * (z12_t1_lo - c.z21_at_T1.hi), (1.0 - p.mu) * (z12_t1_hi - c.z21_at_T1.lo)};
  c.A_negative = c.A_bounds.hi < 0.0;

  const Interval g = exp_gap_range(t2l, t2u, p);
  c.delta_next_bounds = {-p.kappa * std::exp(-p.theta * t2l) - c.A_bounds.hi * g.lo,
                         -p.kappa * std::exp(-p.theta * t2u) - c.A_bounds.lo * g.hi};
  c.delta_next_lower_printed =
      p.kappa * std::exp(-p.theta * t2u) - c.A_upper_constant * numerics::exp_gap(p.theta, p.mu, t2u);

  // q1(T1) = q1(0) r + lambda (1 - r)/theta with r = e^{-theta T1} bounded by the Psi sandwich.
  auto q_at_T1 = [&](double q0, double delta0, double psi_mag) {
    const double denom = p.theta * delta0 + psi_mag;
    const double r = (p.theta * p.kappa + psi_mag) / denom;
    return q0 * r + p.lambda * (delta0 - p.kappa) / denom;
  };
  c.q1_at_T1_lower = q_at_T1(q.lo, d.lo, pu);
  const double drain_u = (1.0 - p.lambda) * decay_integral(p.theta, t2u);
  const double drain_l = (1.0 - p.lambda) * decay_integral(p.theta, t2l);
  c.queue_positivity = c.q1_at_T1_lower * std::exp(-p.theta * t2u) > drain_u;
  c.q_next_lower_printed = c.q1_at_T1_lower * std::exp(-p.theta * t2u);
  const double q1_at_T1_upper = q_at_T1(q.hi, d.hi, pl);
  c.q_next_bounds = {(c.q1_at_T1_lower + p.kappa) * std::exp(-p.theta * t2u) - drain_u,
                     (q1_at_T1_upper + p.kappa) * std::exp(-p.theta * t2l) - drain_l +
                         (1.0 - p.mu) * z12_t1_hi * g.hi};

  c.contained = d.contains(c.delta_next_bounds);
  const bool queue_cap = p.theta == 0.0 || q.hi < p.lambda / p.theta;
  c.verdict = c.release_condition && c.A_negative && c.queue_positivity && c.contained && queue_cap;
  return c;
}

}  // namespace detail

/**
 * @brief Evaluates the endless-oscillation certificate on a box of starts
 * and iterates the nested bounds while they keep certifying.
 */
inline OscillationCertificate certify_endless(const Interval& delta_range, const Interval& q1_range,
                                              const ModelParams& p, int nest_iterations = 25) {
  require_valid(p);
  if (!(p.kappa < delta_range.lo && delta_range.lo <= delta_range.hi))
    throw precondition_error("certify_endless: need kappa < Delta_L(0) <= Delta_U(0)");
  if (!(0.0 < q1_range.lo && q1_range.lo <= q1_range.hi))
    throw precondition_error("certify_endless: need 0 < q1_L(0) <= q1_U(0)");
  if (p.theta > 0.0 && !(q1_range.hi < p.lambda / p.theta))
    throw precondition_error("certify_endless: need q1_U(0) < lambda/theta");

  OscillationCertificate c = detail::certify_box(delta_range, q1_range, p);
  c.nested_bounds_trace.push_back({delta_range, q1_range});
  if (!c.verdict) return c;
  OscillationCertificate cur = c;
  for (int k = 0; k < nest_iterations; ++k) {
    const Interval nd{std::max(cur.delta_bounds.lo, cur.delta_next_bounds.lo),
                      std::min(cur.delta_bounds.hi, cur.delta_next_bounds.hi)};
    const Interval nq = cur.q_next_bounds;
    if (!(nq.lo > 0.0) || (p.theta > 0.0 && !(nq.hi < p.lambda / p.theta))) break;
    c.nested_bounds_trace.push_back({nd, nq});
    const double moved = std::max(std::abs(nd.lo - cur.delta_bounds.lo), std::abs(nd.hi - cur.delta_bounds.hi));
    if (moved < 1e-12) break;
    cur = detail::certify_box(nd, nq, p);
    if (!cur.verdict) break;
  }
  return c;
}

}  // namespace chatterlab
