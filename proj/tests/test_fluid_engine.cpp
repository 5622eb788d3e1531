#include <catch_amalgamated.hpp>

#include <chatterlab/equilibrium.hpp>
#include <chatterlab/fluid_engine.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace chatterlab;
using Catch::Approx;

namespace {

const ModelParams kNoAbandon{0.98, 0.1, 0.0, 0.1, 0.01};
const ModelParams kAbandon{0.98, 0.1, 0.01, 0.1, 0.01};

// Psi written out from the I1 occupancies: -(z11 + mu z21) - (z22 + mu z12).
double psi_direct(double t, double z21_0, double z12_0, const ModelParams& p) {
  const double z11 = (1.0 - z21_0) * std::exp(-t);
  const double z21 = 1.0 - z11;
  const double z12 = z12_0 * std::exp(-p.mu * t);
  const double z22 = 1.0 - z12;
  return -(z11 + p.mu * z21) - (z22 + p.mu * z12);
}

struct Instance {
  ModelParams p;
  StateVector x0;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Instance in;
  ModelParams& p = in.p;
  p.mu = 0.05 + 0.45 * U(rng);
  p.tau = 0.001 + 0.049 * U(rng);
  p.lambda = 0.7 + (0.99 - p.tau - 0.7) * U(rng);
  p.theta = U(rng) < 0.3 ? 0.0 : 0.95 * p.mu * U(rng);
  p.kappa = 0.01 + U(rng);
  const double q1 = 0.05 + 10.0 * U(rng);
  const double delta = p.kappa + 1e-3 + 20.0 * U(rng);
  in.x0 = cycle_start(q1, q1 + delta, p.tau * 0.999 * U(rng), p);
  return in;
}

}  // namespace

TEST_CASE("eval_interval1 at t = 0 returns the start") {
  const StateVector x0 = cycle_start(1.0, 5.0, 0.004, kAbandon);
  CHECK(eval_interval1(x0, 0.0, kAbandon) == x0);
}

TEST_CASE("eval_interval1 queue 1 grows toward lambda/theta") {
  const StateVector x0 = cycle_start(1.0, 500.0, 0.005, kAbandon);
  const double q1 = eval_interval1(x0, 100.0, kAbandon).q1;
  const double ref = oracle::rk4_scalar([](double, double q) { return 0.98 - 0.01 * q; }, 1.0, 100.0, 1e-4);
  CHECK(q1 == Approx(62.316).margin(5e-4));
  CHECK(q1 == Approx(ref).margin(1e-9));
}

TEST_CASE("eval_interval1 shared occupancy") {
  const StateVector x0 = cycle_start(1.0, 50.0, 0.005, kNoAbandon);
  const StateVector x = eval_interval1(x0, 7.27, kNoAbandon);
  // z21' = z11 = 1 - z21 while pool 1 serves only class 2.
  const double ref = oracle::rk4_scalar([](double, double z) { return 1.0 - z; }, 0.005, 7.27, 1e-4);
  CHECK(x.z21 == Approx(0.99930).margin(5e-6));
  CHECK(x.z21 == Approx(ref).margin(1e-10));
  CHECK(x.z12 == Approx(0.01 * std::exp(-0.1 * 7.27)).margin(1e-15));
}

TEST_CASE("eval_interval1 rejects bad input") {
  CHECK_THROWS_AS(eval_interval1(cycle_start(1.0, 5.0, 0.0, kAbandon), -1.0, kAbandon), precondition_error);
  StateVector bad = cycle_start(1.0, 5.0, 0.0, kAbandon);
  bad.z11 = 0.5;
  CHECK_THROWS_AS(eval_interval1(bad, 1.0, kAbandon), precondition_error);
}

TEST_CASE("eval_delta1 examples") {
  CHECK(eval_delta1(4.0, 0.005, 0.0, kAbandon) == Approx(4.0).margin(1e-15));
  CHECK(eval_delta1(4.0, 0.005, 1.0, kAbandon) < eval_delta1(7.0, 0.005, 1.0, kAbandon));

  const ModelParams& p = kAbandon;
  const double ref = oracle::rk4_scalar(
      [&](double t, double d) { return -p.theta * d + psi_direct(t, 0.005, p.tau, p); }, 4.0, 2.0, 1e-4);
  CHECK(eval_delta1(4.0, 0.005, 2.0, p) == Approx(ref).margin(1e-8));
}

TEST_CASE("find_T1 near the threshold") {
  const double t = find_T1(cycle_start(1.0, 1.1 + 1e-9, 0.0, kAbandon), kAbandon);
  CHECK(t >= 0.0);
  CHECK(t < 1e-6);
  CHECK_THROWS_AS(find_T1(cycle_start(1.0, 1.05, 0.0, kAbandon), kAbandon), precondition_error);
}

TEST_CASE("find_T1 agrees with the switching RK4 oracle") {
  const StateVector x0 = cycle_start(1.0, 5.0, 0.005, kAbandon);
  const double T1 = find_T1(x0, kAbandon);
  const auto run = oracle::integrate_cycle(x0, kAbandon, 10.0, 1e-4, 0.01, 1);
  REQUIRE(run.switches.size() == 1);
  CHECK(T1 == Approx(run.switches[0]).margin(1e-6));
  CHECK(eval_delta1(4.0, 0.005, T1, kAbandon) == Approx(kAbandon.kappa).margin(1e-12));
}

TEST_CASE("find_T2 examples") {
  StateVector x = cycle_start(1.0, 2.0, 0.0, kNoAbandon);
  x.z21 = kNoAbandon.tau;
  x.z11 = 1.0 - x.z21;
  CHECK(find_T2(x, kNoAbandon) == 0.0);

  x.z21 = 0.9992;
  x.z11 = 1.0 - x.z21;
  CHECK(find_T2(x, kNoAbandon) == Approx(46.044).margin(1e-3));

  ModelParams p = kNoAbandon;
  p.mu = 0.2;
  x.z21 = 0.5;
  x.z11 = 0.5;
  const double T2 = find_T2(x, p);
  CHECK(T2 == Approx(19.560).margin(1e-3));
  // Integrate z' = -mu z and locate the tau crossing.
  const double scan = oracle::grid_scan_root(
      [&](double t) { return oracle::rk4_scalar([&](double, double z) { return -p.mu * z; }, 0.5, t, 1e-2) - p.tau; },
      0.0, 40.0, 4000);
  CHECK(T2 == Approx(scan).margin(1e-6));
}

TEST_CASE("eval_interval2 examples") {
  const ModelParams& p = kAbandon;
  const StateVector x0 = cycle_start(1.0, 7.0, 0.005, p);
  const HalfCycle hc = half_cycle(x0, p);
  REQUIRE(hc.outcome == CycleOutcome::completed);
  CHECK(eval_interval2(hc.at_sigma1, 0.0, p) == hc.at_sigma1);
  for (int k = 1; k <= 200; ++k) {
    const double t = hc.T2 * k / 200.0;
    REQUIRE(eval_interval2(hc.at_sigma1, t, p).delta() < p.kappa);
  }
  // Full state at the end of I2 against RK4 through both switches.
  const auto run = oracle::integrate_cycle(x0, p, hc.T1 + hc.T2 + 1.0, 1e-4, 0.01, 2);
  REQUIRE(run.switches.size() == 2);
  CHECK(run.switches[1] == Approx(hc.T1 + hc.T2).margin(1e-6));
  const auto rk = oracle::integrate_cycle(x0, p, run.switches[1], 1e-4, run.switches[1], 2);
  CHECK(sup_distance(rk.states.back(), eval_interval2(hc.at_sigma1, hc.T2, p)) < 1e-6);
  CHECK_THROWS_AS(eval_interval2(hc.at_sigma1, hc.T2 + 1.0, p), precondition_error);
}

TEST_CASE("find_sigma_q") {
  SECTION("never on a sharing interval") {
    const StateVector x0 = cycle_start(0.01, 5.0, 0.0, kAbandon);
    CHECK_FALSE(find_sigma_q(x0, Phase::interval1, 100.0, kAbandon).has_value());
  }
  SECTION("queue 1 drains on I2 when lambda is small") {
    const ModelParams p{0.5, 0.1, 0.0, 0.1, 0.01};
    StateVector x{0.001, 5.0, 0.2, 0.005, 0.8, 0.995};
    const auto hit = find_sigma_q(x, Phase::interval2, 50.0, p);
    REQUIRE(hit.has_value());
    // Queue 1 on I2 with theta = 0: q1(0) + (lambda - 1) t + (1 - mu) z21(0) (1 - e^{-mu t}) / mu.
    auto q1 = [&](double t) {
      return x.q1 + (p.lambda - 1.0) * t + (1.0 - p.mu) * x.z21 * (1.0 - std::exp(-p.mu * t)) / p.mu;
    };
    CHECK(*hit == Approx(oracle::grid_scan_root(q1, 1e-9, 50.0)).margin(1e-9));
  }
  SECTION("queues that stay positive give nothing") {
    const ModelParams p{0.99, 0.1, 0.0, 0.1, 0.01};
    StateVector x{5.0, 5.05, 0.1, 0.01, 0.9, 0.99};
    CHECK_FALSE(find_sigma_q(x, Phase::interval2, std::log(0.9 / 0.01) / 0.1, p).has_value());
  }
}

TEST_CASE("half_cycle T2 at the equilibrium start") {
  const StateVector x0 = cycle_start(1.0, 1.2, 0.005, kNoAbandon);
  const ClassificationResult r = iterate_periodic(x0.q1, x0.q2, x0.z21, kNoAbandon);
  REQUIRE(r.periodic.has_value());
  const HalfCycle hc = half_cycle(cycle_start(1.0, 1.0 + 8.663, r.periodic->z21_star, kNoAbandon), kNoAbandon);
  CHECK(hc.T2 == Approx(46.044).margin(5e-3));
}

// The published T1 for this start is not reproduced; the equilibrium T1 is about 7.096.
TEST_CASE("half_cycle published T1 at the equilibrium start", "[!mayfail]") {
  const StateVector x0 = cycle_start(1.0, 1.2, 0.005, kNoAbandon);
  const ClassificationResult r = iterate_periodic(x0.q1, x0.q2, x0.z21, kNoAbandon);
  REQUIRE(r.periodic.has_value());
  const HalfCycle hc = half_cycle(cycle_start(1.0, 1.0 + 8.663, r.periodic->z21_star, kNoAbandon), kNoAbandon);
  CHECK(hc.T1 == Approx(7.270).margin(5e-3));
}

TEST_CASE("half_cycle just above the threshold fails to oscillate") {
  const HalfCycle hc = half_cycle(cycle_start(1.0, 1.0 + 0.1 + 0.001, 0.0, kNoAbandon), kNoAbandon);
  CHECK(hc.outcome == CycleOutcome::oscillation_failed);
  CHECK_THROWS_AS(half_cycle(cycle_start(1.0, 1.05, 0.0, kNoAbandon), kNoAbandon), precondition_error);
}

TEST_CASE("second half of a simulated cycle equals half_cycle of the mirrored state") {
  const StateVector x0 = cycle_start(1.0, 7.0, 0.005, kAbandon);
  const Trajectory tr = simulate(x0, kAbandon, 300.0, 0.5);
  REQUIRE_FALSE(tr.cycles.empty());
  const CycleRecord& c = tr.cycles.front();
  REQUIRE(c.intervals == 4);
  StateVector m = mirror(c.states_at_switch[2]);
  m.z12 = std::min(m.z12, kAbandon.tau);
  const HalfCycle hc = half_cycle(m, kAbandon);
  CHECK(hc.T1 == Approx(c.T[2]).margin(1e-12));
  CHECK(hc.T2 == Approx(c.T[3]).margin(1e-12));
  CHECK(sup_distance(mirror(hc.at_sigma2), c.states_at_switch[4]) < 1e-12);
  for (std::size_t k = 0; k < 4; ++k) CHECK(c.Sigma[k + 1] == c.Sigma[k] + c.T[k]);
}

TEST_CASE("simulate: outward spiral without abandonment") {
  const Trajectory tr = simulate(cycle_start(1.0, 1.2, 0.005, kNoAbandon), kNoAbandon, 1200.0, 0.5);
  std::size_t full = 0;
  for (const auto& c : tr.cycles) full += c.intervals == 4 ? 1 : 0;
  CHECK(full >= 10);
  CHECK(tr.hint == TrajectoryHint::oscillating);
  const CycleRecord& late = tr.cycles[tr.cycles.size() - 2];
  REQUIRE(late.intervals == 4);
  CHECK(late.states_at_switch[0].delta() == Approx(8.7).margin(0.1));
  CHECK(late.states_at_switch[2].delta() == Approx(-8.7).margin(0.1));
  CHECK(late.states_at_switch[1].delta() == Approx(0.1).margin(1e-9));
  CHECK(late.states_at_switch[3].delta() == Approx(-0.1).margin(1e-9));
  CHECK(late.states_at_switch[2].z21 == Approx(0.01).margin(1e-9));
  CHECK(late.states_at_switch[4].z12 == Approx(0.01).margin(1e-9));
  for (std::size_t i = 1; i < tr.samples.size(); ++i) REQUIRE(tr.samples[i].t > tr.samples[i - 1].t);
}

TEST_CASE("simulate: inward spiral into relaxation") {
  const ModelParams p{0.98, 0.3, 0.0, 0.1, 0.01};
  const Trajectory tr = simulate(cycle_start(1.0, 21.0, 0.005, p), p, 1500.0, 0.5);
  CHECK(tr.hint == TrajectoryHint::relaxing);
  CHECK(tr.cycles.size() >= 3);
  CHECK(tr.cycles.size() <= 5);
  CHECK(tr.cycles.back().terminated_by != CycleOutcome::completed);
  CHECK(sup_distance(tr.samples.back().x, stationary_point(p)) < 1e-6);
}

TEST_CASE("simulate with zero horizon") {
  const StateVector x0 = cycle_start(1.0, 3.0, 0.0, kAbandon);
  const Trajectory tr = simulate(x0, kAbandon, 0.0, 0.1);
  REQUIRE(tr.samples.size() == 1);
  CHECK(tr.samples[0].x == x0);
  CHECK(tr.samples[0].t == 0.0);
  CHECK_THROWS_AS(simulate(x0, kAbandon, -1.0, 0.1), precondition_error);
  CHECK_THROWS_AS(simulate(x0, kAbandon, 1.0, 0.0), precondition_error);
}

// With abandonment, -theta Delta > 0 once Delta < 0 and can outweigh the decaying drift late in I2.
TEST_CASE("Delta turns upward late in I2 when theta > 0") {
  const ModelParams& p = kAbandon;
  const HalfCycle hc = half_cycle(cycle_start(1.0, 7.0, 0.005, p), p);
  REQUIRE(hc.outcome == CycleOutcome::completed);
  const double a = eval_interval2(hc.at_sigma1, hc.T2 - 1.0, p).delta();
  const double b = eval_interval2(hc.at_sigma1, hc.T2, p).delta();
  CHECK(b > a);
  CHECK(b < -p.kappa);
}

TEST_CASE("below-threshold starts relax to the stationary point") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const ModelParams p{0.9, 0.2 + 0.3 * U(rng), 0.05 * U(rng), 0.5, 0.01};
    const double q1 = 0.5 * U(rng), q2 = 0.5 * U(rng);
    const StateVector x0{q1, q2, 1.0, 0.0, 0.0, 1.0};
    const Trajectory tr = simulate(x0, p, 2000.0, 1.0);
    REQUIRE(tr.hint == TrajectoryHint::relaxing);
    CHECK(sup_distance(tr.samples.back().x, stationary_point(p)) < 1e-6);
  }
}

TEST_CASE("half-cycle invariants on random instances") {
  std::mt19937_64 rng(2024);
  int completed = 0;
  for (int i = 0; i < 1000; ++i) {
    const Instance in = random_instance(rng);
    const ModelParams& p = in.p;
    const StateVector& x0 = in.x0;
    const HalfCycle hc = half_cycle(x0, p);
    const PsiBounds pb = psi_bounds(p);
    double prev = x0.delta();
    for (int k = 1; k <= 40; ++k) {
      const double t = hc.T1 * k / 40.0;
      const StateVector x = eval_interval1(x0, t, p);
      // Delta strictly decreasing on I1.
      REQUIRE(x.delta() < prev);
      prev = x.delta();
      REQUIRE(std::abs(x.z11 + x.z21 - 1.0) < 1e-12);
      REQUIRE(std::abs(x.z22 + x.z12 - 1.0) < 1e-12);
      if (p.theta > 0.0) {
        REQUIRE(x.q1 <= std::max(x0.q1, p.lambda / p.theta) + 1e-9);
        REQUIRE(x.q2 <= std::max(x0.q2, p.lambda / p.theta) + 1e-9);
      }
      // Sandwich with the directly derived Psi bounds.
      const double e = std::exp(-p.theta * t);
      const double w = p.theta > 0.0 ? (1.0 - e) / p.theta : t;
      REQUIRE(x.delta() >= x0.delta() * e - pb.upper * w - 1e-10);
      REQUIRE(x.delta() <= x0.delta() * e - pb.lower * w + 1e-10);
      const double ps = psi_direct(t, x0.z21, x0.z12, p);
      REQUIRE(-ps >= pb.lower - 1e-12);
      REQUIRE(-ps <= pb.upper + 1e-12);
    }
    const double end2 = hc.sigma_q ? *hc.sigma_q - hc.T1 : hc.T2;
    for (int k = 1; k <= 40; ++k) {
      const double t = end2 * k / 40.0;
      const StateVector x = eval_interval2(hc.at_sigma1, t, p);
      REQUIRE(x.delta() < p.kappa + 1e-12);
      // Decreasing on [0, Sigma_2) without abandonment; with theta > 0 only while Delta >= 0.
      if (p.theta == 0.0 || prev >= 0.0) REQUIRE(x.delta() < prev + 1e-12);
      prev = x.delta();
      REQUIRE(std::abs(x.z11 + x.z21 - 1.0) < 1e-12);
      REQUIRE(std::abs(x.z22 + x.z12 - 1.0) < 1e-12);
      if (p.theta > 0.0) {
        REQUIRE(x.q1 <= std::max(x0.q1, p.lambda / p.theta) + 1e-9);
        REQUIRE(x.q2 <= std::max(x0.q2, p.lambda / p.theta) + 1e-9);
      }
    }
    if (hc.outcome == CycleOutcome::completed) ++completed;
  }
  // The sample is meant to exercise full half cycles, not only failures.
  CHECK(completed > 300);
}

TEST_CASE("closed form matches RK4 over one cycle on random instances") {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int i = 0; i < 200 && checked < 6; ++i) {
    Instance in = random_instance(rng);
    in.p.theta = (checked % 2 == 0) ? 0.0 : std::min(0.01, 0.5 * in.p.mu);
    const Trajectory tr = simulate(in.x0, in.p, 2000.0, 0.05);
    if (tr.cycles.empty() || tr.cycles.front().intervals < 4) continue;
    const double end = tr.cycles.front().Sigma[4];
    if (end > 400.0) continue;
    const auto rk = oracle::integrate_cycle(in.x0, in.p, end, 1e-3, 0.05, 4);
    double gap = 0.0;
    std::size_t j = 0;
    for (const auto& s : tr.samples) {
      if (s.t > end - 1e-9) break;
      while (j < rk.times.size() && rk.times[j] < s.t - 1e-9) ++j;
      if (j < rk.times.size() && std::abs(rk.times[j] - s.t) < 1e-9) gap = std::max(gap, sup_distance(s.x, rk.states[j]));
    }
    CHECK(gap < 1e-6);
    ++checked;
  }
  CHECK(checked == 6);
}
