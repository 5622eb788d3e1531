#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"
#include "fluid_engine.hpp"

namespace chatterlab {

/**
 * @brief Parameters of the stochastic X model at scale n.
 *
 * Rates are the unscaled CTMC rates (lambda1 is arrivals per unit time, not
 * per server). mu_ij is the rate of a class-i customer served in pool j.
 */
struct CtmcParams {
  int n{1};
  double lambda1{0.0};
  double lambda2{0.0};
  long m1{1};
  long m2{1};
  double mu11{1.0};
  double mu12{1.0};
  double mu21{1.0};
  double mu22{1.0};
  double theta1{0.0};
  double theta2{0.0};
  long k12{0};
  long k21{0};
  long tau12{0};
  long tau21{0};
  double r12{1.0};
  double r21{1.0};

  // Symmetric system at scale n: m = n agents per pool, thresholds rounded from kappa n, tau n.
  static CtmcParams symmetric(const ModelParams& p, int n) {
    if (n < 1) throw precondition_error("CtmcParams::symmetric: n must be >= 1");
    CtmcParams c;
    c.n = n;
    c.lambda1 = c.lambda2 = p.lambda * n;
    c.m1 = c.m2 = n;
    c.mu11 = c.mu22 = 1.0;
    c.mu12 = c.mu21 = p.mu;
    c.theta1 = c.theta2 = p.theta;
    c.k12 = c.k21 = std::lround(p.kappa * n);
    c.tau12 = c.tau21 = std::lround(p.tau * n);
    return c;
  }

  // Fluid parameters seen from class/pool 1.
  ModelParams fluid_limit() const {
    return {lambda1 / n, mu21, theta1, static_cast<double>(k12) / n, static_cast<double>(tau21) / n};
  }

  void validate() const {
    auto need = [](bool ok, const char* msg) {
      if (!ok) throw precondition_error(std::string("CtmcParams: ") + msg);
    };
    need(n >= 1, "n >= 1");
    need(m1 >= 1 && m2 >= 1, "pool sizes >= 1");
    need(lambda1 >= 0.0 && lambda2 >= 0.0, "arrival rates >= 0");
    need(mu11 > 0.0 && mu12 > 0.0 && mu21 > 0.0 && mu22 > 0.0, "service rates > 0");
    need(theta1 >= 0.0 && theta2 >= 0.0, "abandonment rates >= 0");
    need(k12 >= 0 && k21 >= 0 && tau12 >= 0 && tau21 >= 0, "thresholds >= 0");
    need(r12 > 0.0 && r21 > 0.0, "queue ratios > 0");
  }
};

struct CtmcState {
  long Q1{0};
  long Q2{0};
  long Z11{0};
  long Z12{0};
  long Z21{0};
  long Z22{0};
  double clock{0.0};

  double D12(const CtmcParams& p) const { return Q1 - p.r12 * Q2 - p.k12; }
  double D21(const CtmcParams& p) const { return p.r21 * Q2 - Q1 - p.k21; }
  long busy1() const { return Z11 + Z21; }
  long busy2() const { return Z12 + Z22; }

  StateVector scaled(int n) const {
    const double s = 1.0 / n;
    return {Q1 * s, Q2 * s, Z11 * s, Z12 * s, Z21 * s, Z22 * s};
  }

  static CtmcState from_fluid(const StateVector& x, int n) {
    CtmcState s;
    s.Q1 = std::lround(x.q1 * n);
    s.Q2 = std::lround(x.q2 * n);
    s.Z12 = std::lround(x.z12 * n);
    s.Z21 = std::lround(x.z21 * n);
    // Round pool totals first so a full fluid pool stays exactly full.
    s.Z11 = std::max(0L, std::lround((x.z11 + x.z21) * n) - s.Z21);
    s.Z22 = std::max(0L, std::lround((x.z12 + x.z22) * n) - s.Z12);
    return s;
  }

  bool operator==(const CtmcState&) const = default;
};

inline void require_valid_state(const CtmcState& s, const CtmcParams& p) {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw precondition_error(std::string("CtmcState: ") + msg);
  };
  need(s.Q1 >= 0 && s.Q2 >= 0 && s.Z11 >= 0 && s.Z12 >= 0 && s.Z21 >= 0 && s.Z22 >= 0, "counts >= 0");
  need(s.busy1() <= p.m1 && s.busy2() <= p.m2, "pool occupancy exceeds pool size");
  need(s.Q1 == 0 || s.busy1() == p.m1, "queue 1 waiting while pool 1 has an idle agent");
  need(s.Q2 == 0 || s.busy2() == p.m2, "queue 2 waiting while pool 2 has an idle agent");
}

enum class Routing { serve_class1, serve_class2, idle };

/**
 * @brief Choice of a newly available agent in `pool` (1 or 2).
 *
 * Sharing toward a class needs its D-process positive and the reverse
 * occupancy at or below the release threshold. An agent whose own queue is
 * empty still takes a customer of the other class once that queue has
 * reached its activation threshold.
 */
inline Routing route_on_service_completion(const CtmcState& s, int pool, const CtmcParams& p) {
  if (pool == 2) {
    if (s.busy2() >= p.m2) throw precondition_error("route_on_service_completion: pool 2 has no free agent");
    if (s.D12(p) > 0.0 && s.Q1 > 0 && s.Z21 <= p.tau21) return Routing::serve_class1;
    if (s.Q2 > 0) return Routing::serve_class2;
    if (s.Q1 > 0 && s.Q1 >= p.k12) return Routing::serve_class1;
    return Routing::idle;
  }
  if (pool == 1) {
    if (s.busy1() >= p.m1) throw precondition_error("route_on_service_completion: pool 1 has no free agent");
    if (s.D21(p) > 0.0 && s.Q2 > 0 && s.Z12 <= p.tau12) return Routing::serve_class2;
    if (s.Q1 > 0) return Routing::serve_class1;
    if (s.Q2 > 0 && s.Q2 >= p.k21) return Routing::serve_class2;
    return Routing::idle;
  }
  throw precondition_error("route_on_service_completion: pool must be 1 or 2");
}

enum class CtmcEvent {
  none,
  arrival1,
  arrival2,
  abandon1,
  abandon2,
  service11,
  service12,
  service21,
  service22,
};

/**
 * @brief Direct-method simulator. The next event time is drawn once and kept
 * across advance() calls, so the path does not depend on the sampling grid.
 */
class CtmcSimulator {
 public:
  CtmcSimulator(const CtmcParams& p, const CtmcState& x0, std::uint64_t seed) : p_(p), s_(x0) {
    p_.validate();
    require_valid_state(s_, p_);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    rng_.seed(seq);
  }

  CtmcSimulator(const CtmcParams& p, const CtmcState& x0, std::uint64_t base_seed, std::uint64_t rep)
      : p_(p), s_(x0) {
    p_.validate();
    require_valid_state(s_, p_);
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
    rng_.seed(seq);
  }

  const CtmcState& state() const { return s_; }
  const CtmcParams& params() const { return p_; }
  CtmcEvent last_event() const { return last_; }
  std::uint64_t events() const { return count_; }

  double total_rate() const {
    return p_.lambda1 + p_.lambda2 + p_.theta1 * s_.Q1 + p_.theta2 * s_.Q2 + p_.mu11 * s_.Z11 +
           p_.mu12 * s_.Z12 + p_.mu21 * s_.Z21 + p_.mu22 * s_.Z22;
  }

  // Executes the next event. Returns false when no event can occur.
  bool step() {
    if (!schedule()) return false;
    s_.clock = next_time_;
    has_next_ = false;
    fire(pick());
    return true;
  }

  // Runs all events with time <= t_stop and leaves the clock at t_stop.
  void advance(double t_stop) {
    while (schedule() && next_time_ <= t_stop) step();
    s_.clock = std::max(s_.clock, t_stop);
  }

 private:
  bool schedule() {
    if (has_next_) return true;
    const double rate = total_rate();
    if (!(rate > 0.0)) return false;
    next_time_ = s_.clock + std::exponential_distribution<double>(rate)(rng_);
    has_next_ = true;
    return true;
  }

  CtmcEvent pick() {
    const double rates[8] = {p_.lambda1,           p_.lambda2,           p_.theta1 * s_.Q1,
                             p_.theta2 * s_.Q2,    p_.mu11 * s_.Z11,     p_.mu12 * s_.Z12,
                             p_.mu21 * s_.Z21,     p_.mu22 * s_.Z22};
    double total = 0.0;
    for (double r : rates) total += r;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng_);
    int last_positive = 0;
    for (int i = 0; i < 8; ++i) {
      if (rates[i] <= 0.0) continue;
      last_positive = i;
      if (u < rates[i]) return static_cast<CtmcEvent>(i + 1);
      u -= rates[i];
    }
    return static_cast<CtmcEvent>(last_positive + 1);
  }

  void arrive(int cls) {
    long& Q = cls == 1 ? s_.Q1 : s_.Q2;
    const bool own_idle = cls == 1 ? s_.busy1() < p_.m1 : s_.busy2() < p_.m2;
    const bool other_idle = cls == 1 ? s_.busy2() < p_.m2 : s_.busy1() < p_.m1;
    if (own_idle) {
      ++(cls == 1 ? s_.Z11 : s_.Z22);
      return;
    }
    if (other_idle) {
      // Admission to the other pool follows the same rules as a freed agent there.
      CtmcState probe = s_;
      ++(cls == 1 ? probe.Q1 : probe.Q2);
      const Routing r = route_on_service_completion(probe, cls == 1 ? 2 : 1, p_);
      if (r == (cls == 1 ? Routing::serve_class1 : Routing::serve_class2)) {
        ++(cls == 1 ? s_.Z12 : s_.Z21);
        return;
      }
    }
    ++Q;
  }

  void complete(int cls, int pool) {
    long& Z = cls == 1 ? (pool == 1 ? s_.Z11 : s_.Z12) : (pool == 1 ? s_.Z21 : s_.Z22);
    --Z;
    switch (route_on_service_completion(s_, pool, p_)) {
      case Routing::serve_class1:
        --s_.Q1;
        ++(pool == 1 ? s_.Z11 : s_.Z12);
        break;
      case Routing::serve_class2:
        --s_.Q2;
        ++(pool == 1 ? s_.Z21 : s_.Z22);
        break;
      case Routing::idle: break;
    }
  }

  void fire(CtmcEvent e) {
    last_ = e;
    ++count_;
    switch (e) {
      case CtmcEvent::arrival1: arrive(1); break;
      case CtmcEvent::arrival2: arrive(2); break;
      case CtmcEvent::abandon1: --s_.Q1; break;
      case CtmcEvent::abandon2: --s_.Q2; break;
      case CtmcEvent::service11: complete(1, 1); break;
      case CtmcEvent::service12: complete(1, 2); break;
      case CtmcEvent::service21: complete(2, 1); break;
      case CtmcEvent::service22: complete(2, 2); break;
      case CtmcEvent::none: break;
    }
  }

  CtmcParams p_;
  CtmcState s_;
  std::mt19937_64 rng_;
  bool has_next_{false};
  double next_time_{0.0};
  CtmcEvent last_{CtmcEvent::none};
  std::uint64_t count_{0};
};

// Which sharing regime the stochastic state is in, read the same way as the fluid cycle.
inline Phase ctmc_phase(const CtmcState& s, const CtmcParams& p) {
  if (s.D21(p) > 0.0 && s.Z12 <= p.tau12) return Phase::interval1;
  if (s.D12(p) > 0.0 && s.Z21 <= p.tau21) return Phase::interval3;
  if (s.Z21 > p.tau21) return Phase::interval2;
  if (s.Z12 > p.tau12) return Phase::interval4;
  return Phase::relaxation;
}

/**
 * @brief Fluid-scaled CTMC path sampled every `sample_dt` time units
 * (time itself is not scaled).
 */
inline Trajectory simulate_ctmc(const CtmcState& x0, const CtmcParams& p, double horizon, std::uint64_t seed,
                                double sample_dt = 0.1) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw precondition_error("simulate_ctmc: horizon must be > 0");
  if (!(sample_dt > 0.0)) throw precondition_error("simulate_ctmc: sample_dt must be positive");
  CtmcState start = x0;
  start.clock = 0.0;
  CtmcSimulator sim(p, start, seed);
  Trajectory tr;
  tr.params = p.fluid_limit();
  tr.hint = TrajectoryHint::relaxing;
  const auto steps = static_cast<long long>(std::floor(horizon / sample_dt + 1e-9));
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sample_dt;
    sim.advance(t);
    tr.samples.push_back({t, sim.state().scaled(p.n), ctmc_phase(sim.state(), p)});
  }
  if (tr.samples.back().t < horizon) {
    sim.advance(horizon);
    tr.samples.push_back({horizon, sim.state().scaled(p.n), ctmc_phase(sim.state(), p)});
  }
  return tr;
}

// Number of worker threads, capped by CHATTERLAB_THREADS when set.
inline unsigned worker_count(std::size_t tasks) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CHATTERLAB_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(tasks, 1)));
}

// Runs body(i) for i in [0, count) on up to worker_count(count) threads.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct GapRow {
  int n{0};
  double median{0.0};
  double q1{0.0};
  double q3{0.0};
  std::vector<double> gaps;
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
}

// Sample times of the reference path up to horizon, stopping before relaxation or sliding.
inline std::vector<std::size_t> comparison_indices(const Trajectory& ref, double horizon) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const Sample& s = ref.samples[i];
    if (s.t > horizon + 1e-12) break;
    if (s.phase == Phase::relaxation || s.phase == Phase::sliding_detected) break;
    idx.push_back(i);
  }
  return idx;
}

}  // namespace detail

/**
 * @brief Sup-norm gap between fluid-scaled CTMC paths and a fluid reference,
 * evaluated at the reference sample times.
 *
 * The comparison window ends at `horizon` or at the first relaxation sample
 * of the reference (the first time a queue empties). Replication r of every
 * n is seeded from (base_seed, r).
 */
inline std::vector<GapRow> fwlln_gap(const std::vector<CtmcParams>& family, const Trajectory& ref, double horizon,
                                     int reps, std::uint64_t base_seed = 1) {
  if (reps < 1) throw precondition_error("fwlln_gap: reps must be >= 1");
  if (ref.samples.empty()) throw precondition_error("fwlln_gap: empty reference trajectory");
  const ModelParams& fp = ref.params;
  for (const auto& c : family) {
    c.validate();
    const ModelParams lim = c.fluid_limit();
    const double slack = 0.5 / c.n + 1e-12;
    const bool ok = std::abs(lim.lambda - fp.lambda) <= 1e-9 * std::max(1.0, fp.lambda) &&
                    std::abs(lim.mu - fp.mu) <= 1e-12 && std::abs(lim.theta - fp.theta) <= 1e-12 &&
                    std::abs(lim.kappa - fp.kappa) <= slack && std::abs(lim.tau - fp.tau) <= slack &&
                    c.lambda1 == c.lambda2 && c.m1 == c.n && c.m2 == c.n;
    if (!ok) throw precondition_error("fwlln_gap: CTMC parameters do not match the fluid reference at n = " +
                                      std::to_string(c.n));
  }
  const auto idx = detail::comparison_indices(ref, horizon);
  const StateVector x0 = ref.samples.front().x;

  std::vector<GapRow> rows(family.size());
  std::vector<std::vector<double>> gaps(family.size(), std::vector<double>(static_cast<std::size_t>(reps)));
  const std::size_t total = family.size() * static_cast<std::size_t>(reps);
  parallel_for(total, [&](std::size_t task) {
    const std::size_t fi = task / static_cast<std::size_t>(reps);
    const std::size_t rep = task % static_cast<std::size_t>(reps);
    const CtmcParams& c = family[fi];
    CtmcSimulator sim(c, CtmcState::from_fluid(x0, c.n), base_seed, rep);
    double worst = 0.0;
    for (std::size_t i : idx) {
      sim.advance(ref.samples[i].t);
      worst = std::max(worst, sup_distance(sim.state().scaled(c.n), ref.samples[i].x));
    }
    gaps[fi][rep] = worst;
  });
  for (std::size_t fi = 0; fi < family.size(); ++fi) {
    rows[fi].n = family[fi].n;
    rows[fi].gaps = gaps[fi];
    rows[fi].median = detail::quantile(gaps[fi], 0.5);
    rows[fi].q1 = detail::quantile(gaps[fi], 0.25);
    rows[fi].q3 = detail::quantile(gaps[fi], 0.75);
  }
  return rows;
}

/**
 * @brief Counts alternations between "z12 high" and "z21 high" episodes.
 *
 * An episode of one kind starts when its occupancy exceeds `band` while the
 * other is below band; it is re-armed only after the occupancy has fallen
 * below band - hysteresis. Consecutive episodes of the same kind count once.
 */
inline int oscillation_detector(const Trajectory& traj, double band, double hysteresis = -1.0) {
  if (hysteresis < 0.0) hysteresis = 0.2 * band;
  enum class Side { none, z12_high, z21_high };
  Side last = Side::none;
  Side active = Side::none;
  int alternations = 0;
  for (const auto& s : traj.samples) {
    const double a = s.x.z12;
    const double b = s.x.z21;
    if (active == Side::z12_high && a < band - hysteresis) active = Side::none;
    if (active == Side::z21_high && b < band - hysteresis) active = Side::none;
    if (active != Side::none) continue;
    Side now = Side::none;
    if (a > band && b < band) now = Side::z12_high;
    else if (b > band && a < band) now = Side::z21_high;
    if (now == Side::none) continue;
    active = now;
    if (now != last) ++alternations;
    last = now;
  }
  return alternations;
}

}  // namespace chatterlab
