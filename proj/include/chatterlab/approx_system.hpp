#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "fluid_engine.hpp"
#include "numerics.hpp"

namespace chatterlab {

// Cycle-start data of the jump system; off-diagonal occupancies are zero at every start.
struct ApproxCycleState {
  double delta{0.0};
  double t1a{0.0};
  double t2a{0.0};
  double z_at_T1{0.0};
  // Queue difference handed to the next half cycle (after label reversal).
  double delta_next{0.0};
};

/**
 * @brief Sharing time of the jump system: the root of
 * h(T) = Delta - 1 + mu - kappa + (1 - mu) e^{-T} - (1 + mu) T.
 *
 * h is strictly decreasing with h(0) = Delta - kappa > 0, so a safeguarded
 * Newton iteration inside a bracket always converges.
 */
inline double solve_T1a(double delta, const ModelParams& p) {
  require_valid(p);
  if (!(delta > p.kappa) || !std::isfinite(delta)) throw precondition_error("solve_T1a: Delta must exceed kappa");
  const double base = delta - 1.0 + p.mu - p.kappa;
  auto h = [&](double T) { return base + (1.0 - p.mu) * std::exp(-T) - (1.0 + p.mu) * T; };
  auto dh = [&](double T) { return -(1.0 - p.mu) * std::exp(-T) - (1.0 + p.mu); };
  double lo = 0.0;
  double hi = delta / (1.0 + p.mu) + 1.0;
  if (base > 0.0) {
    lo = base / (1.0 + p.mu);
    hi = lo + 1.0;
  }
  double T = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    const double v = h(T);
    if (v == 0.0) return T;
    if (v > 0.0) lo = T; else hi = T;
    double next = T - v / dh(T);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - T) <= 1e-15 * std::max(1.0, T) || hi - lo <= 1e-15 * std::max(1.0, hi)) return next;
    T = next;
  }
  return T;
}

// Release time after a sharing interval of length t1a; zero when z21 never exceeds tau.
inline double t2a(double t1a, const ModelParams& p) {
  require_valid(p);
  if (!(t1a >= 0.0)) throw precondition_error("t2a: t1a must be >= 0");
  const double z = -std::expm1(-t1a);
  return z > p.tau ? std::log(z / p.tau) / p.mu : 0.0;
}

// Cycle map Delta -> ((1 - mu)/mu)(1 - e^{-T1a(Delta)} - tau) - kappa.
inline double delta_map(double delta, const ModelParams& p) {
  const double T = solve_T1a(delta, p);
  return (1.0 - p.mu) / p.mu * (-std::expm1(-T) - p.tau) - p.kappa;
}

inline ApproxCycleState approx_half_cycle(double delta, const ModelParams& p) {
  ApproxCycleState s;
  s.delta = delta;
  s.t1a = solve_T1a(delta, p);
  s.t2a = t2a(s.t1a, p);
  s.z_at_T1 = -std::expm1(-s.t1a);
  s.delta_next = (1.0 - p.mu) / p.mu * (s.z_at_T1 - p.tau) - p.kappa;
  return s;
}

// e^{-(Delta - 1 + mu - kappa)/(1 + mu)}: the heuristic value of e^{-T1a}.
inline double xi(double delta, const ModelParams& p) {
  return std::exp(-(delta - 1.0 + p.mu - p.kappa) / (1.0 + p.mu));
}

// Supremum of the map's image.
inline double delta_bound(const ModelParams& p) { return (1.0 - p.mu) * (1.0 - p.tau) / p.mu; }

namespace detail {

inline PeriodicEquilibrium approx_equilibrium(double delta, const ModelParams& p) {
  const ApproxCycleState s = approx_half_cycle(delta, p);
  PeriodicEquilibrium e;
  e.delta_star = delta;
  e.z21_star = 0.0;
  e.z_at_T1 = s.z_at_T1;
  e.T_star = {s.t1a, s.t2a, s.t1a, s.t2a};
  e.period = 2.0 * (s.t1a + s.t2a);
  e.closure_residual = std::abs(s.delta_next - delta);
  e.closure_residual_full = e.closure_residual;
  return e;
}

}  // namespace detail

/**
 * @brief Iterates the cycle map from delta0.
 *
 * Once three successive steps move in the same direction a secant step is
 * tried; it is kept only if it lands closer to the fixed point than the
 * plain map. Extrapolated entries are listed in `accelerated`.
 */
inline ClassificationResult iterate_approx(double delta0, const ModelParams& p, double tol = 1e-12,
                                           int max_iter = 200, bool accelerate = true) {
  require_valid(p);
  if (!(delta0 > p.kappa)) throw precondition_error("iterate_approx: Delta(0) must exceed kappa");
  if (!(tol > 0.0) || max_iter < 1) throw precondition_error("iterate_approx: tol > 0 and max_iter >= 1 required");

  ClassificationResult r;
  r.delta_history.push_back(delta0);
  double d = delta0;
  int monotone = 0;
  int last_sign = 0;
  std::vector<double> plain{delta0};  // chain of plain map values since the last extrapolation

  for (int k = 1; k <= max_iter; ++k) {
    const double next = delta_map(d, p);
    r.iterations_used = k;
    r.delta_history.push_back(next);
    if (!(next > p.kappa)) {
      r.verdict = Verdict::stationary_convergent;
      r.stop_reason = "iterate " + std::to_string(k) + " fell to or below kappa";
      return r;
    }
    const double step = next - d;
    if (std::abs(step) < tol) {
      r.verdict = Verdict::oscillatory;
      r.periodic = detail::approx_equilibrium(next, p);
      r.stop_reason = "successive iterates differ by less than tolerance";
      return r;
    }
    const int sign = step > 0.0 ? 1 : -1;
    monotone = sign == last_sign ? monotone + 1 : 1;
    last_sign = sign;
    plain.push_back(next);
    d = next;

    if (accelerate && monotone >= 3 && plain.size() >= 3) {
      const std::size_t m = plain.size();
      const double x0 = plain[m - 3], x1 = plain[m - 2], x2 = plain[m - 1];
      const double g0 = x1 - x0, g1 = x2 - x1;
      if (g1 != g0) {
        const double s = x1 - g0 * (x1 - x0) / (g1 - g0);
        if (std::isfinite(s) && s > p.kappa) {
          const double ms = delta_map(s, p);
          if (std::abs(ms - s) < std::abs(g1)) {
            r.accelerated.push_back(r.delta_history.size());
            r.delta_history.push_back(s);
            d = s;
            plain.assign(1, s);
            monotone = 0;
            last_sign = 0;
          }
        }
      }
    }
  }
  r.verdict = Verdict::undetermined;
  r.stop_reason = "iteration limit reached";
  return r;
}

struct MuRoots {
  double mu1{0.0};
  double mu2{0.0};
};

// Roots of mu^2 - (2 + kappa - tau) mu + (1 - tau) = 0, where the lower and upper ends of S_mu meet.
inline MuRoots mu_roots(double kappa, double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0)) throw precondition_error("mu_roots: kappa and tau must be positive");
  const double b = 2.0 + kappa - tau;
  const double disc = std::sqrt((kappa - tau) * (kappa - tau) + 4.0 * kappa);
  // mu1 mu2 = 1 - tau; use it to avoid cancellation in the smaller root.
  const double mu2 = 0.5 * (b + disc);
  return {(1.0 - tau) / mu2, mu2};
}

struct RateConstants {
  double mu1{0.0};
  double mu2{0.0};
  double c{0.5};
  double delta_max{0.0};
  double delta_mu{0.0};
  Interval S;
  // Sup of the map derivative on S, divided by ((1 - mu)/mu) e^{(1 - mu + kappa)/(1 + mu)}.
  double lipschitz_K{0.0};
  double rho{0.0};
  // Printed constant e^{-((1 - mu)/mu)(1 - c) + kappa}/(1 + mu) and the rate it would give.
  double lipschitz_K_printed{0.0};
  double rho_printed{0.0};
  double R{0.0};
  double beta{0.0};
  double vartheta{0.0};
  double epsilon_guard{0.0};
  bool maps_into_itself{false};
  bool contraction_certified{false};
};

/**
 * @brief Contraction data of the cycle map on S_mu = [Delta_M - delta_mu, Delta_M].
 *
 * The map is increasing, so S_mu maps into itself iff both endpoints do.
 */
inline RateConstants contraction_rate(const ModelParams& p, double c = 0.5) {
  require_valid(p);
  RateConstants r;
  const MuRoots roots = mu_roots(p.kappa, p.tau);
  r.mu1 = roots.mu1;
  r.mu2 = roots.mu2;
  if (!(p.mu < r.mu1)) throw precondition_error("contraction_rate: mu must lie below the smaller root");
  if (!(c > 0.0 && c < 1.0 - p.tau)) throw precondition_error("contraction_rate: margin c must lie in (0, 1 - tau)");
  r.c = c;
  const double a = (1.0 - p.mu) / p.mu;
  r.delta_max = delta_bound(p);
  r.delta_mu = a * c + p.kappa;
  r.S = {r.delta_max - r.delta_mu, r.delta_max};
  r.lipschitz_K = std::exp(-r.S.lo / (1.0 + p.mu)) / (1.0 + p.mu);
  const double scale = a * std::exp((1.0 - p.mu + p.kappa) / (1.0 + p.mu));
  r.rho = r.lipschitz_K * scale;
  r.lipschitz_K_printed = std::exp(-a * (1.0 - c) + p.kappa) / (1.0 + p.mu);
  r.rho_printed = r.lipschitz_K_printed * scale;
  r.R = (r.delta_max - 1.0 + p.mu - p.kappa) / (1.0 + p.mu) + 1.0 + std::log(1.0 / p.tau) / p.mu;
  r.epsilon_guard = -std::log1p(-p.tau);
  const bool lower_ok = r.S.lo > 1.0 - p.mu + p.kappa;
  r.maps_into_itself = lower_ok && delta_map(r.S.lo, p) >= r.S.lo && delta_map(r.S.hi, p) <= r.S.hi;
  r.contraction_certified = r.maps_into_itself && r.rho < 1.0;
  if (r.rho < 1.0) {
    r.beta = -std::log(r.rho) / (2.0 * r.R);
    r.vartheta = r.delta_mu / (1.0 - r.rho);
  }
  return r;
}

namespace detail {

class ApproxSimulator : public FluidSimulator {
 public:
  using FluidSimulator::FluidSimulator;

 protected:
  void run_cycles(StateVector xf, bool flipped, double t) override {
    auto actual = [](const StateVector& v, bool flip) { return flip ? mirror(v) : v; };
    if (xf.z12 != 0.0 || xf.z21 != 0.0) {
      StateVector reset = xf;
      reset.z12 = 0.0;
      reset.z21 = 0.0;
      reset.z11 = 1.0;
      reset.z22 = 1.0;
      traj_.jumps.push_back({t, actual(xf, flipped), actual(reset, flipped)});
      xf = reset;
    }
    for (;;) {
      CycleRecord rec;
      rec.starts_mirrored = flipped;
      rec.Sigma[0] = t;
      rec.states_at_switch.push_back(actual(xf, flipped));
      for (int half = 0; half < 2; ++half) {
        const double T1 = solve_T1a(xf.delta(), p_);
        const StateVector s1 = interval1_state(xf, T1, p_);
        const double T2 = t2a(T1, p_);
        const Phase phase_a = flipped ? Phase::interval3 : Phase::interval1;
        const Phase phase_b = flipped ? Phase::interval4 : Phase::interval2;
        auto eval_a = [&, flip = flipped](double s) { return actual(interval1_state(xf, s, p_), flip); };
        auto eval_b = [&, flip = flipped](double s) { return actual(interval2_state(s1, s, p_), flip); };

        if (t + T1 >= horizon_) {
          emit(t, horizon_ - t, eval_a, phase_a);
          push_sample(horizon_, eval_a(horizon_ - t), phase_a);
          traj_.cycles.push_back(rec);
          return;
        }
        emit(t, T1, eval_a, phase_a);
        t += T1;
        add_epoch(rec, T1, t, actual(s1, flipped));

        std::optional<double> hit;
        for (auto cand : {first_queue_zero(s1.q1, s1.z21, T2, p_), first_queue_zero(s1.q2, s1.z12, T2, p_)}) {
          if (cand && (!hit || *cand < *hit)) hit = cand;
        }
        const double len_b = hit ? *hit : T2;
        if (t + len_b >= horizon_) {
          emit(t, horizon_ - t, eval_b, phase_b);
          push_sample(horizon_, eval_b(horizon_ - t), phase_b);
          traj_.cycles.push_back(rec);
          return;
        }
        emit(t, len_b, eval_b, phase_b);
        t += len_b;
        if (hit) {
          StateVector y = interval2_state(s1, *hit, p_);
          if (y.q1 <= y.q2) y.q1 = 0.0; else y.q2 = 0.0;
          rec.sigma_q = t;
          rec.terminated_by = CycleOutcome::queue_hit_zero;
          traj_.cycles.push_back(rec);
          run_relaxation(actual(y, flipped), t);
          return;
        }
        // z21 jumps from tau to 0 so that the next start has no foreign mass.
        const StateVector left = interval2_state(s1, T2, p_);
        StateVector right = left;
        right.z21 = 0.0;
        right.z11 = 1.0;
        traj_.jumps.push_back({t, actual(left, flipped), actual(right, flipped)});
        add_epoch(rec, T2, t, actual(right, flipped));
        if (!(T2 > 0.0 && -right.delta() > p_.kappa)) {
          rec.terminated_by = CycleOutcome::oscillation_failed;
          traj_.cycles.push_back(rec);
          run_relaxation(actual(right, flipped), t);
          return;
        }
        xf = mirror(right);
        flipped = !flipped;
      }
      rec.terminated_by = CycleOutcome::completed;
      traj_.cycles.push_back(rec);
    }
  }
};

}  // namespace detail

/**
 * @brief Path of the jump system (theta forced to 0) from a state with no
 * foreign mass in service.
 */
inline Trajectory simulate_approx(const StateVector& x0, const ModelParams& p, double horizon,
                                  double sample_dt = 0.01) {
  require_valid(p);
  require_well_formed(x0, "simulate_approx");
  if (std::abs(x0.z12) > kStateTol || std::abs(x0.z21) > kStateTol)
    throw precondition_error("simulate_approx: z12(0) and z21(0) must be 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw precondition_error("simulate_approx: horizon must be > 0");
  if (!(sample_dt > 0.0)) throw precondition_error("simulate_approx: sample_dt must be positive");
  ModelParams pa = p;
  pa.theta = 0.0;
  StateVector x = x0;
  x.z12 = 0.0;
  x.z21 = 0.0;
  return detail::ApproxSimulator(pa, horizon, sample_dt).run(x);
}

struct HeuristicResult {
  ClassificationResult result;
  double xi_star{0.0};
  std::vector<double> xi_history;
};

/**
 * @brief Iterates Delta' = ((1 - mu)/mu)(1 - xi(Delta) - tau) - kappa.
 *
 * Every computed value is recorded before the stop test, so a run that
 * stops on xi > 1 still shows the (negative) next iterate.
 */
inline HeuristicResult heuristic_iterate(double delta0, const ModelParams& p, int max_iter = 200,
                                         double tol = 1e-12) {
  require_valid(p);
  if (!(delta0 > p.kappa)) throw precondition_error("heuristic_iterate: Delta(0) must exceed kappa");
  if (!(xi(delta0, p) < 1.0)) throw precondition_error("heuristic_iterate: xi(Delta(0)) must be below 1");
  HeuristicResult h;
  ClassificationResult& r = h.result;
  r.delta_history.push_back(delta0);
  double d = delta0;
  for (int k = 1; k <= max_iter; ++k) {
    const double x = xi(d, p);
    const double next = (1.0 - p.mu) / p.mu * (1.0 - x - p.tau) - p.kappa;
    h.xi_history.push_back(x);
    r.delta_history.push_back(next);
    r.iterations_used = k;
    if (x > 1.0 || !(next > p.kappa)) {
      r.verdict = Verdict::stationary_convergent;
      r.stop_reason = x > 1.0 ? "xi exceeded 1 at iteration " + std::to_string(k)
                              : "iterate fell to or below kappa at iteration " + std::to_string(k);
      h.xi_star = x;
      return h;
    }
    if (std::abs(next - d) < tol) {
      h.xi_star = xi(next, p);
      r.verdict = Verdict::oscillatory;
      PeriodicEquilibrium e;
      e.delta_star = next;
      e.z_at_T1 = 1.0 - h.xi_star;
      const double T1 = -std::log(h.xi_star);
      const double T2 = std::log((1.0 - h.xi_star) / p.tau) / p.mu;
      e.T_star = {T1, T2, T1, T2};
      e.period = 2.0 * (T1 + T2);
      e.closure_residual = std::abs(next - d);
      e.closure_residual_full = e.closure_residual;
      r.periodic = e;
      r.stop_reason = "successive iterates differ by less than tolerance";
      return h;
    }
    d = next;
  }
  r.verdict = Verdict::undetermined;
  r.stop_reason = "iteration limit reached";
  h.xi_star = xi(d, p);
  return h;
}

// Long-run throughput per pool from the heuristic cycle, integrating z21 exactly.
inline double throughput_closed_form(double xi_star, const ModelParams& p) {
  const double mlx = -std::log(xi_star);
  const double num = mlx + xi_star - 1.0 + (1.0 - xi_star - p.tau) / p.mu;
  const double den = 2.0 * (mlx + std::log((1.0 - xi_star) / p.tau) / p.mu);
  return 1.0 - (1.0 - p.mu) * num / den;
}

// The same quantity in the printed form (leading (1 + mu)/2 and 1 + xi - tau in the bracket).
inline double throughput_printed(double xi_star, const ModelParams& p) {
  const double mlx = -std::log(xi_star);
  const double num = mlx + xi_star - 1.0 + (1.0 + xi_star - p.tau) / p.mu;
  const double den = 2.0 * (mlx + std::log((1.0 - xi_star) / p.tau) / p.mu);
  return 0.5 * (1.0 + p.mu) - (1.0 - p.mu) * num / den;
}

struct CollapseReport {
  double xi_star{0.0};
  double lambda{0.0};
  double L_closed_form{0.0};
  double L_printed{0.0};
  double L_oracle{0.0};
  double delta_star{0.0};
  double cycle_length{0.0};
  bool collapse{false};
};

/**
 * @brief Time average of 1 - (1 - mu) z21 over one cycle of the jump system.
 *
 * Trapezoid rule over the sampled path; at a jump the left value closes the
 * preceding panel.
 */
inline double throughput_time_average(const Trajectory& tr, double t0, double t1, const ModelParams& p) {
  auto z21_left = [&](const Sample& s) {
    for (const auto& j : tr.jumps)
      if (std::abs(j.t - s.t) <= 1e-9) return j.left.z21;
    return s.x.z21;
  };
  double integral = 0.0;
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    const Sample& a = tr.samples[i - 1];
    const Sample& b = tr.samples[i];
    if (a.t < t0 - 1e-12 || b.t > t1 + 1e-9) continue;
    const double za = a.x.z21;
    const double zb = z21_left(b);
    integral += 0.5 * (b.t - a.t) * ((1.0 - (1.0 - p.mu) * za) + (1.0 - (1.0 - p.mu) * zb));
  }
  return integral / (t1 - t0);
}

/**
 * @brief Congestion-collapse check from the heuristic fixed point xi_star.
 *
 * The oracle value comes from one cycle of the jump system at its exact
 * fixed point and decides the verdict.
 */
inline CollapseReport throughput_L(double xi_star, const ModelParams& p, double sample_dt = 1e-3) {
  require_valid(p);
  if (!(xi_star > 0.0 && xi_star < 1.0)) throw precondition_error("throughput_L: xi* must lie in (0, 1)");
  CollapseReport c;
  c.xi_star = xi_star;
  c.lambda = p.lambda;
  c.L_closed_form = throughput_closed_form(xi_star, p);
  c.L_printed = throughput_printed(xi_star, p);

  ModelParams pa = p;
  pa.theta = 0.0;
  const double start = (1.0 - p.mu + p.kappa) - (1.0 + p.mu) * std::log(xi_star);
  if (!(start > p.kappa)) throw precondition_error("throughput_L: xi* gives no sharing start");
  const ClassificationResult eq = iterate_approx(start, pa);
  if (eq.verdict != Verdict::oscillatory) throw numerical_error("throughput_L: jump system has no periodic cycle");
  c.delta_star = eq.periodic->delta_star;
  c.cycle_length = eq.periodic->period;
  // Queues large enough that neither empties within the cycle.
  const double q0 = 10.0 * c.cycle_length + 10.0;
  const StateVector x0{q0, q0 + c.delta_star, 1.0, 0.0, 0.0, 1.0};
  const Trajectory tr = simulate_approx(x0, pa, c.cycle_length, sample_dt);
  c.L_oracle = throughput_time_average(tr, 0.0, c.cycle_length, pa);
  c.collapse = c.L_oracle < p.lambda;
  return c;
}

}  // namespace chatterlab
