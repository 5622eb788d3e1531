#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "core_model.hpp"
#include "errors.hpp"
#include "numerics.hpp"

namespace chatterlab {

enum class CycleOutcome { completed, queue_hit_zero, oscillation_failed, sliding_detected };

inline const char* to_string(CycleOutcome o) {
  switch (o) {
    case CycleOutcome::completed: return "Completed";
    case CycleOutcome::queue_hit_zero: return "QueueHitZero";
    case CycleOutcome::oscillation_failed: return "OscillationFailed";
    case CycleOutcome::sliding_detected: return "SlidingDetected";
  }
  return "?";
}

/**
 * @brief One sharing interval followed by one release interval.
 *
 * Times are measured from the start of the half cycle.
 */
struct HalfCycle {
  double T1{0.0};
  double T2{0.0};
  StateVector start;
  StateVector at_sigma1;
  // State at Sigma_2, or at Sigma_q when a queue empties first.
  StateVector at_sigma2;
  std::optional<double> sigma_q;
  CycleOutcome outcome{CycleOutcome::completed};
};

/**
 * @brief Holding and switching times of one cycle.
 *
 * Only the first `intervals` entries of T are meaningful; states_at_switch
 * holds the state at Sigma_0 and at every reached switching epoch.
 */
struct CycleRecord {
  std::array<double, 4> T{};
  std::array<double, 5> Sigma{};
  std::vector<StateVector> states_at_switch;
  std::size_t intervals{0};
  std::optional<double> sigma_q;
  CycleOutcome terminated_by{CycleOutcome::completed};
  // True when the cycle starts with class 1 being helped (interval I3).
  bool starts_mirrored{false};
};

struct Sample {
  double t{0.0};
  StateVector x;
  Phase phase{Phase::interval1};
};

// Discontinuity of the path; `samples` holds the right value.
struct Jump {
  double t{0.0};
  StateVector left;
  StateVector right;
};

enum class TrajectoryHint { oscillating, relaxing, sliding_detected };

inline const char* to_string(TrajectoryHint h) {
  switch (h) {
    case TrajectoryHint::oscillating: return "oscillating";
    case TrajectoryHint::relaxing: return "relaxing";
    case TrajectoryHint::sliding_detected: return "sliding_detected";
  }
  return "?";
}

struct Trajectory {
  ModelParams params;
  std::vector<Sample> samples;
  std::vector<CycleRecord> cycles;
  std::vector<Jump> jumps;
  TrajectoryHint hint{TrajectoryHint::oscillating};
  std::optional<double> sliding_time;
};

namespace detail {

// Interval I1 with arbitrary z12(0): both pools serve queue 2.
inline StateVector interval1_state(const StateVector& x0, double t, const ModelParams& p) {
  using numerics::decay_integral;
  using numerics::exp_gap;
  StateVector x;
  x.z11 = (1.0 - x0.z21) * std::exp(-t);
  x.z21 = 1.0 - x.z11;
  x.z12 = x0.z12 * std::exp(-p.mu * t);
  x.z22 = 1.0 - x.z12;
  const double decay = std::exp(-p.theta * t);
  const double ramp = decay_integral(p.theta, t);
  x.q1 = x0.q1 * decay + p.lambda * ramp;
  x.q2 = x0.q2 * decay + (p.lambda - 1.0 - p.mu) * ramp -
         (1.0 - p.mu) * (1.0 - x0.z21) * exp_gap(p.theta, 1.0, t) +
         (1.0 - p.mu) * x0.z12 * exp_gap(p.theta, p.mu, t);
  return x;
}

inline double interval1_delta(double delta0, double z21_0, double z12_0, double t, const ModelParams& p) {
  using numerics::decay_integral;
  using numerics::exp_gap;
  return delta0 * std::exp(-p.theta * t) - (1.0 + p.mu) * decay_integral(p.theta, t) -
         (1.0 - p.mu) * (1.0 - z21_0) * exp_gap(p.theta, 1.0, t) +
         (1.0 - p.mu) * z12_0 * exp_gap(p.theta, p.mu, t);
}

// Queue of a full pool with no active sharing; z_foreign decays at rate mu.
inline double full_pool_queue(double q0, double z_foreign0, double t, const ModelParams& p) {
  return q0 * std::exp(-p.theta * t) + (p.lambda - 1.0) * numerics::decay_integral(p.theta, t) +
         (1.0 - p.mu) * z_foreign0 * numerics::exp_gap(p.theta, p.mu, t);
}

inline double full_pool_queue_rate(double q0, double z_foreign0, double t, const ModelParams& p) {
  return -p.theta * full_pool_queue(q0, z_foreign0, t, p) + p.lambda - 1.0 +
         (1.0 - p.mu) * z_foreign0 * std::exp(-p.mu * t);
}

// Release interval: both pools full, no sharing, foreign mass decays.
inline StateVector interval2_state(const StateVector& x1, double t, const ModelParams& p) {
  StateVector x;
  const double fade = std::exp(-p.mu * t);
  x.z21 = x1.z21 * fade;
  x.z11 = 1.0 - x.z21;
  x.z12 = x1.z12 * fade;
  x.z22 = 1.0 - x.z12;
  x.q1 = full_pool_queue(x1.q1, x1.z21, t, p);
  x.q2 = full_pool_queue(x1.q2, x1.z12, t, p);
  return x;
}

// First zero in (0, horizon] of a full-pool queue. Any critical point of
// the queue is a strict maximum, so the path rises at most once then falls.
inline std::optional<double> first_queue_zero(double q0, double z_foreign0, double horizon,
                                              const ModelParams& p) {
  auto q = [&](double t) { return full_pool_queue(q0, z_foreign0, t, p); };
  auto dq = [&](double t) { return full_pool_queue_rate(q0, z_foreign0, t, p); };
  if (horizon <= 0.0) return std::nullopt;
  double lo = 0.0;
  if (q0 <= 0.0) {
    if (dq(0.0) <= 0.0) return 0.0;
    if (dq(horizon) > 0.0) return std::nullopt;
    lo = numerics::bisect_predicate([&](double t) { return dq(t) > 0.0; }, 0.0, horizon);
  }
  if (q(horizon) > 0.0) return std::nullopt;
  return numerics::bisect_predicate([&](double t) { return q(t) > 0.0; }, lo, horizon);
}

inline void require_sharing_start(const StateVector& x0, const ModelParams& p, const char* what) {
  require_well_formed(x0, what);
  if (!x0.pools_full()) throw precondition_error(std::string(what) + ": both pools must be full");
  if (x0.z12 > p.tau + kStateTol) throw precondition_error(std::string(what) + ": z12(0) must not exceed tau");
}

inline double find_T1_general(const StateVector& x0, const ModelParams& p) {
  const double d0 = x0.delta();
  if (!(d0 > p.kappa)) throw precondition_error("find_T1: Delta(0) must exceed kappa");
  auto f = [&](double t) { return interval1_delta(d0, x0.z21, x0.z12, t, p) - p.kappa; };
  double lo = 0.0;
  double hi = 1.0;
  if (p.theta > 0.0) {
    const auto b = t1_bounds(d0, p);
    lo = b.lower;
    hi = b.upper;
    if (!(f(lo) > 0.0)) lo = 0.0;
  }
  for (int i = 0; f(hi) > 0.0; ++i) {
    if (i > 200) throw numerical_error("find_T1: failed to bracket the threshold crossing");
    lo = hi;
    hi *= 2.0;
  }
  return numerics::bisect_root(f, lo, hi);
}

inline HalfCycle half_cycle_general(const StateVector& x0, const ModelParams& p) {
  HalfCycle hc;
  hc.start = x0;
  hc.T1 = find_T1_general(x0, p);
  hc.at_sigma1 = interval1_state(x0, hc.T1, p);
  const double z = hc.at_sigma1.z21;
  hc.T2 = z > p.tau ? std::log(z / p.tau) / p.mu : 0.0;

  std::optional<double> hit;
  for (auto cand : {first_queue_zero(hc.at_sigma1.q1, hc.at_sigma1.z21, hc.T2, p),
                    first_queue_zero(hc.at_sigma1.q2, hc.at_sigma1.z12, hc.T2, p)}) {
    if (cand && (!hit || *cand < *hit)) hit = cand;
  }
  if (hit) {
    hc.sigma_q = hc.T1 + *hit;
    hc.at_sigma2 = interval2_state(hc.at_sigma1, *hit, p);
    StateVector& y = hc.at_sigma2;
    if (y.q1 <= y.q2) y.q1 = 0.0; else y.q2 = 0.0;
    hc.outcome = CycleOutcome::queue_hit_zero;
    return hc;
  }
  hc.at_sigma2 = interval2_state(hc.at_sigma1, hc.T2, p);
  const bool continues = hc.T2 > 0.0 && -hc.at_sigma2.delta() > p.kappa;
  hc.outcome = continues ? CycleOutcome::completed : CycleOutcome::oscillation_failed;
  return hc;
}

}  // namespace detail

/**
 * @brief Queue difference on I1 started from Delta(0) = delta0, z21(0),
 * z12(0) = tau.
 */
inline double eval_delta1(double delta0, double z21_0, double t, const ModelParams& p) {
  require_valid(p);
  if (!(t >= 0.0) || !std::isfinite(t)) throw precondition_error("eval_delta1: t must be finite and >= 0");
  return detail::interval1_delta(delta0, z21_0, p.tau, t, p);
}

/**
 * @brief Closed-form state on I1 (class 2 helped by pool 1).
 *
 * Accepts any z12(0) <= tau so that the same form serves the approximating
 * system (z12 = 0) and restarts from relaxation.
 */
inline StateVector eval_interval1(const StateVector& x0, double t, const ModelParams& p) {
  require_valid(p);
  if (!(t >= 0.0) || !std::isfinite(t)) throw precondition_error("eval_interval1: t must be finite and >= 0");
  detail::require_sharing_start(x0, p, "eval_interval1");
  if (t == 0.0) return x0;
  return detail::interval1_state(x0, t, p);
}

// Unique root of Delta(t) = kappa on I1, by bisection inside the analytic bracket.
inline double find_T1(const StateVector& x0, const ModelParams& p) {
  require_valid(p);
  detail::require_sharing_start(x0, p, "find_T1");
  return detail::find_T1_general(x0, p);
}

// Time for z21 to decay from its value at Sigma_1 to tau; 0 when already at or below tau.
inline double find_T2(const StateVector& x_at_T1, const ModelParams& p) {
  require_valid(p);
  const double z = x_at_T1.z21;
  if (!(z >= 0.0 && z <= 1.0 + kStateTol)) throw precondition_error("find_T2: z21 outside [0,1]");
  return z > p.tau ? std::log(z / p.tau) / p.mu : 0.0;
}

// Closed-form state on I2 (no sharing, pool 1 releases class-2 fluid).
inline StateVector eval_interval2(const StateVector& x_at_T1, double t, const ModelParams& p) {
  const double t2 = find_T2(x_at_T1, p);
  if (!(t >= 0.0) || t > t2 * (1.0 + 1e-12) + 1e-12)
    throw precondition_error("eval_interval2: t outside [0, T2]");
  require_well_formed(x_at_T1, "eval_interval2");
  if (!x_at_T1.pools_full()) throw precondition_error("eval_interval2: both pools must be full");
  if (t == 0.0) return x_at_T1;
  return detail::interval2_state(x_at_T1, t, p);
}

// Sharing-free queue difference on I2: kappa e^{-theta t} + A (e^{-theta t} - e^{-mu t})/(mu - theta).
inline double sharing_imbalance(const StateVector& x_at_T1, const ModelParams& p) {
  return (1.0 - p.mu) * (x_at_T1.z12 - x_at_T1.z21);
}

/**
 * @brief Earliest time in (0, horizon] at which a queue empties, measured
 * from the segment start.
 *
 * Queues stay positive on sharing intervals, so I1 and I3 return nothing.
 */
inline std::optional<double> find_sigma_q(const StateVector& x_segment_start, Phase phase, double horizon,
                                          const ModelParams& p) {
  require_valid(p);
  if (phase == Phase::interval1 || phase == Phase::interval3) return std::nullopt;
  if (phase == Phase::sliding_detected) return std::nullopt;
  std::optional<double> hit;
  for (auto cand : {detail::first_queue_zero(x_segment_start.q1, x_segment_start.z21, horizon, p),
                    detail::first_queue_zero(x_segment_start.q2, x_segment_start.z12, horizon, p)}) {
    if (cand && (!hit || *cand < *hit)) hit = cand;
  }
  return hit;
}

/**
 * @brief Computes T1, T2 and the states at Sigma_1 and Sigma_2 from a
 * cycle start; flags queue emptying and oscillation failure.
 */
inline HalfCycle half_cycle(const StateVector& x0, const ModelParams& p) {
  require_valid(p);
  const auto check = check_initial_condition(x0, p);
  if (!check) {
    std::string msg = "half_cycle: invalid start:";
    for (const auto& d : check.diagnostics) msg += " [" + d + "]";
    throw precondition_error(msg);
  }
  return detail::half_cycle_general(x0, p);
}

namespace detail {

class FluidSimulator {
 public:
  FluidSimulator(const ModelParams& p, double horizon, double dt) : p_(p), horizon_(horizon), dt_(dt) {
    traj_.params = p;
  }

  Trajectory run(const StateVector& x0) {
    if (cycle_ready(x0)) {
      run_cycles(x0, false, 0.0);
    } else if (cycle_ready(mirror(x0))) {
      run_cycles(mirror(x0), true, 0.0);
    } else {
      run_relaxation(x0, 0.0);
    }
    return std::move(traj_);
  }

  virtual ~FluidSimulator() = default;

 protected:
  static constexpr double kScanStep = 0.01;

  bool cycle_ready(const StateVector& xf) const {
    return xf.delta() > p_.kappa && xf.z12 <= p_.tau + kStateTol && xf.pools_full();
  }

  void push_sample(double t, const StateVector& x, Phase ph) {
    if (!traj_.samples.empty() && std::abs(traj_.samples.back().t - t) <= 1e-12 * std::max(1.0, t)) {
      traj_.samples.back() = {traj_.samples.back().t, x, ph};
      return;
    }
    traj_.samples.push_back({t, x, ph});
  }

  // Samples [t0, t0 + len): the start point plus interior grid points.
  template <class Eval>
  void emit(double t0, double len, Eval&& at, Phase ph) {
    if (len <= 0.0) return;
    push_sample(t0, at(0.0), ph);
    const double t1 = t0 + len;
    // Keep grid points clear of epochs so 9-digit output stays strictly increasing.
    const double guard = std::max(1e-9 * dt_, 1e-6 * std::max(1.0, t1));
    for (auto k = static_cast<long long>(std::floor(t0 / dt_)) + 1;; ++k) {
      const double tk = static_cast<double>(k) * dt_;
      if (tk >= t1 - guard) break;
      if (tk <= t0 + guard) continue;
      traj_.samples.push_back({tk, at(tk - t0), ph});
    }
  }

  virtual void run_cycles(StateVector xf, bool flipped, double t) {
    auto actual = [](const StateVector& v, bool flip) { return flip ? mirror(v) : v; };
    for (;;) {
      CycleRecord rec;
      rec.starts_mirrored = flipped;
      rec.Sigma[0] = t;
      rec.states_at_switch.push_back(actual(xf, flipped));
      for (int half = 0; half < 2; ++half) {
        const HalfCycle hc = half_cycle_general(xf, p_);
        const Phase phase_a = flipped ? Phase::interval3 : Phase::interval1;
        const Phase phase_b = flipped ? Phase::interval4 : Phase::interval2;
        auto eval_a = [&, flip = flipped](double s) { return actual(interval1_state(xf, s, p_), flip); };
        const StateVector s1 = hc.at_sigma1;
        auto eval_b = [&, flip = flipped](double s) { return actual(interval2_state(s1, s, p_), flip); };

        if (t + hc.T1 >= horizon_) {
          emit(t, horizon_ - t, eval_a, phase_a);
          push_sample(horizon_, eval_a(horizon_ - t), phase_a);
          traj_.cycles.push_back(rec);
          traj_.hint = TrajectoryHint::oscillating;
          return;
        }
        emit(t, hc.T1, eval_a, phase_a);
        t += hc.T1;
        add_epoch(rec, hc.T1, t, actual(hc.at_sigma1, flipped));

        const double len_b = hc.sigma_q ? *hc.sigma_q - hc.T1 : hc.T2;
        if (t + len_b >= horizon_) {
          emit(t, horizon_ - t, eval_b, phase_b);
          push_sample(horizon_, eval_b(horizon_ - t), phase_b);
          traj_.cycles.push_back(rec);
          traj_.hint = TrajectoryHint::oscillating;
          return;
        }
        emit(t, len_b, eval_b, phase_b);
        t += len_b;
        if (hc.outcome == CycleOutcome::queue_hit_zero) {
          rec.sigma_q = t;
          rec.terminated_by = CycleOutcome::queue_hit_zero;
          traj_.cycles.push_back(rec);
          run_relaxation(actual(hc.at_sigma2, flipped), t);
          return;
        }
        add_epoch(rec, hc.T2, t, actual(hc.at_sigma2, flipped));
        if (hc.outcome == CycleOutcome::oscillation_failed) {
          rec.terminated_by = CycleOutcome::oscillation_failed;
          traj_.cycles.push_back(rec);
          run_relaxation(actual(hc.at_sigma2, flipped), t);
          return;
        }
        xf = mirror(hc.at_sigma2);
        xf.z12 = std::min(xf.z12, p_.tau);
        flipped = !flipped;
      }
      rec.terminated_by = CycleOutcome::completed;
      traj_.cycles.push_back(rec);
    }
  }

  static void add_epoch(CycleRecord& rec, double T, double t, const StateVector& x) {
    const std::size_t k = rec.intervals;
    rec.T[k] = T;
    rec.Sigma[k + 1] = rec.Sigma[k] + T;
    // Keep Sigma as the exact running sum; t agrees up to rounding.
    (void)t;
    rec.states_at_switch.push_back(x);
    ++rec.intervals;
  }

  // No-sharing dynamics; each pool is either full (queue dynamics) or has idle capacity.
  struct Relax {
    StateVector x0;
    bool full1{true};
    bool full2{true};

    StateVector at(double s, const ModelParams& p) const {
      StateVector x;
      const double fade = std::exp(-p.mu * s);
      x.z21 = x0.z21 * fade;
      x.z12 = x0.z12 * fade;
      const double settle = std::exp(-s);
      if (full1) {
        x.z11 = 1.0 - x.z21;
        x.q1 = full_pool_queue(x0.q1, x0.z21, s, p);
      } else {
        x.z11 = p.lambda + (x0.z11 - p.lambda) * settle;
        x.q1 = 0.0;
      }
      if (full2) {
        x.z22 = 1.0 - x.z12;
        x.q2 = full_pool_queue(x0.q2, x0.z12, s, p);
      } else {
        x.z22 = p.lambda + (x0.z22 - p.lambda) * settle;
        x.q2 = 0.0;
      }
      return x;
    }
  };

  static bool starts_full(double q, double z_own, double z_foreign, const ModelParams& p) {
    if (q > 0.0) return true;
    const bool at_capacity = z_own + z_foreign >= 1.0 - kStateTol;
    return at_capacity && p.lambda - (z_own + p.mu * z_foreign) > 0.0;
  }

  // Time at which an idle-capacity pool's occupancy reaches 1, if ever.
  std::optional<double> pool_fills(double z_own0, double z_foreign0, double horizon) const {
    auto total = [&](double s) {
      return p_.lambda + (z_own0 - p_.lambda) * std::exp(-s) + z_foreign0 * std::exp(-p_.mu * s);
    };
    if (!(p_.lambda > z_own0) || z_foreign0 <= 0.0) return std::nullopt;
    const double peak = std::log((p_.lambda - z_own0) / (p_.mu * z_foreign0)) / (1.0 - p_.mu);
    if (!(peak > 0.0)) return std::nullopt;
    const double s_peak = std::min(peak, horizon);
    if (total(s_peak) < 1.0 || total(0.0) >= 1.0) return std::nullopt;
    return numerics::bisect_predicate([&](double s) { return total(s) < 1.0; }, 0.0, s_peak);
  }

  void stop_sliding(double t, const StateVector& x) {
    push_sample(t, x, Phase::sliding_detected);
    traj_.hint = TrajectoryHint::sliding_detected;
    traj_.sliding_time = t;
  }

  void run_relaxation(StateVector x, double t) {
    if (x.q1 > 0.0 && x.z11 + x.z21 < 1.0 - kStateTol)
      throw precondition_error("simulate: queue 1 positive while pool 1 has idle capacity");
    if (x.q2 > 0.0 && x.z22 + x.z12 < 1.0 - kStateTol)
      throw precondition_error("simulate: queue 2 positive while pool 2 has idle capacity");
    Relax seg{x, starts_full(x.q1, x.z11, x.z21, p_), starts_full(x.q2, x.z22, x.z12, p_)};
    if (!seg.full1) seg.x0.q1 = 0.0;
    if (!seg.full2) seg.x0.q2 = 0.0;
    traj_.hint = TrajectoryHint::relaxing;

    for (long guard = 0;; ++guard) {
      if (guard > 10'000'000) throw numerical_error("simulate: relaxation did not advance");
      const StateVector& s0 = seg.x0;
      // A threshold already exceeded with sharing permitted ends relaxation.
      for (int dir = 0; dir < 2; ++dir) {
        const StateVector xf = dir == 0 ? s0 : mirror(s0);
        const bool helper_full = dir == 0 ? seg.full1 : seg.full2;
        if (xf.d21(p_.kappa) > 0.0 && (xf.z12 <= p_.tau + kStateTol || !helper_full)) {
          if (cycle_ready(xf) && seg.full1 && seg.full2 && xf.q1 > 0.0) {
            StateVector start = xf;
            start.z12 = std::min(start.z12, p_.tau);
            run_cycles(start, dir == 1, t);
          } else {
            stop_sliding(t, s0);
          }
          return;
        }
      }

      const double remaining = horizon_ - t;
      double s_next = remaining;
      enum class Ev { horizon, empty1, empty2, fill1, fill2, release1, release2, cross } ev = Ev::horizon;
      auto take = [&](std::optional<double> s, Ev e) {
        if (s && *s < s_next) {
          s_next = *s;
          ev = e;
        }
      };
      if (seg.full1) take(first_queue_zero(s0.q1, s0.z21, remaining, p_), Ev::empty1);
      else take(pool_fills(s0.z11, s0.z21, remaining), Ev::fill1);
      if (seg.full2) take(first_queue_zero(s0.q2, s0.z12, remaining, p_), Ev::empty2);
      else take(pool_fills(s0.z22, s0.z12, remaining), Ev::fill2);
      // Pending sharing waits for the foreign mass of the helping pool to reach tau.
      if (s0.d12(p_.kappa) > 0.0 && s0.z21 > p_.tau) take(std::log(s0.z21 / p_.tau) / p_.mu, Ev::release2);
      if (s0.d21(p_.kappa) > 0.0 && s0.z12 > p_.tau) take(std::log(s0.z12 / p_.tau) / p_.mu, Ev::release1);

      // Threshold crossings from below, located by scanning then bisection.
      auto crossing = [&](double s) {
        const StateVector y = seg.at(s, p_);
        return y.d12(p_.kappa) > 0.0 || y.d21(p_.kappa) > 0.0;
      };
      const bool above0 = s0.d12(p_.kappa) > 0.0 || s0.d21(p_.kappa) > 0.0;
      if (!above0) {
        for (double a = 0.0; a < s_next;) {
          const double b = std::min(a + kScanStep, s_next);
          if (crossing(b)) {
            s_next = numerics::bisect_bracket([&](double s) { return !crossing(s); }, a, b).second;
            ev = Ev::cross;
            break;
          }
          a = b;
        }
      }

      emit(t, s_next, [&](double s) { return seg.at(s, p_); }, Phase::relaxation);
      StateVector y = seg.at(s_next, p_);
      t += s_next;
      if (ev == Ev::horizon) {
        push_sample(horizon_, y, Phase::relaxation);
        return;
      }
      Relax next{y, seg.full1, seg.full2};
      switch (ev) {
        case Ev::empty1: next.full1 = false; next.x0.q1 = 0.0; break;
        case Ev::empty2: next.full2 = false; next.x0.q2 = 0.0; break;
        case Ev::fill1: next.full1 = true; next.x0.q1 = 0.0; next.x0.z11 = 1.0 - y.z21; break;
        case Ev::fill2: next.full2 = true; next.x0.q2 = 0.0; next.x0.z22 = 1.0 - y.z12; break;
        case Ev::release1: next.x0.z12 = p_.tau; break;
        case Ev::release2: next.x0.z21 = p_.tau; break;
        default: break;
      }
      seg = next;
    }
  }

  ModelParams p_;
  double horizon_;
  double dt_;
  Trajectory traj_;
};

}  // namespace detail

/**
 * @brief Piecewise-exact fluid path from x0 up to `horizon`.
 *
 * Chains half cycles through label reversal while oscillation continues,
 * then follows the no-sharing relaxation toward (0, 0, lambda, 0, 0, lambda).
 * A threshold crossing that would start sharing outside the cycle structure
 * ends the path with a SlidingDetected sample.
 */
inline Trajectory simulate(const StateVector& x0, const ModelParams& p, double horizon, double sample_dt) {
  require_valid(p);
  require_well_formed(x0, "simulate");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw precondition_error("simulate: horizon must be >= 0");
  if (!(sample_dt > 0.0)) throw precondition_error("simulate: sample_dt must be positive");
  if (horizon == 0.0) {
    Trajectory tr;
    tr.params = p;
    const bool sharing = x0.delta() > p.kappa && x0.z12 <= p.tau + kStateTol && x0.pools_full();
    const bool sharing_m = -x0.delta() > p.kappa && x0.z21 <= p.tau + kStateTol && x0.pools_full();
    const Phase ph = sharing ? Phase::interval1 : sharing_m ? Phase::interval3 : Phase::relaxation;
    tr.samples.push_back({0.0, x0, ph});
    tr.hint = sharing || sharing_m ? TrajectoryHint::oscillating : TrajectoryHint::relaxing;
    return tr;
  }
  return detail::FluidSimulator(p, horizon, sample_dt).run(x0);
}

}  // namespace chatterlab
