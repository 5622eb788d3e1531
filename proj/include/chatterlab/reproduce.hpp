#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "approx_system.hpp"
#include "core_model.hpp"
#include "ctmc_sim.hpp"
#include "equilibrium.hpp"
#include "fluid_engine.hpp"
#include "io.hpp"
#include "svg.hpp"

namespace chatterlab::reproduce {

using json = nlohmann::json;

// lambda = 0.98, tau = 0.01, kappa = 0.1 throughout; mu and theta vary.
inline ModelParams no_abandonment() { return {0.98, 0.1, 0.0, 0.1, 0.01}; }
inline ModelParams bifurcation() { return {0.98, 0.3, 0.0, 0.1, 0.01}; }
inline ModelParams with_abandonment() { return {0.98, 0.1, 0.01, 0.1, 0.01}; }
inline ModelParams no_oscillation() { return {0.98, 0.5, 0.5, 0.1, 0.01}; }

// q1 = 1, q2 = 1.2, z12 = tau, z21 = tau/2.
inline StateVector standard_start(const ModelParams& p) {
  return cycle_start(1.0, 1.2, 0.5 * p.tau, p);
}

inline StateVector bifurcation_start(const ModelParams& p) { return cycle_start(1.0, 21.0, 0.5 * p.tau, p); }

// Start used for the CTMC-versus-fluid comparison: a sharing start well above the threshold.
inline StateVector comparison_start(const ModelParams& p) { return cycle_start(5.0, 10.0, 0.0, p); }

inline constexpr std::uint64_t kBaseSeed = 20240917;

inline const std::vector<std::string>& targets() {
  static const std::vector<std::string> t{"table1", "fig3_6", "fig7_8", "fig9_10", "sec7_4", "appendixA_example"};
  return t;
}

// One computed-versus-reference line of a comparison report.
inline json compare(const std::string& quantity, double computed, double reference, double tolerance) {
  return {{"quantity", quantity},
          {"computed", io::num(computed)},
          {"reference", reference},
          {"tolerance", tolerance},
          {"within_tolerance", std::abs(computed - reference) <= tolerance}};
}

namespace detail {

inline void write(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  io::write_text_file((dir / name).string(), text);
}

inline json delta_at_cycle_starts(const Trajectory& tr) {
  json a = json::array();
  for (const auto& c : tr.cycles) {
    if (c.states_at_switch.empty()) continue;
    const StateVector& x = c.states_at_switch.front();
    a.push_back({{"t", io::num(c.Sigma[0])},
                 {"delta", io::num(x.delta())},
                 {"q1", io::num(x.q1)},
                 {"q2", io::num(x.q2)}});
  }
  return a;
}

inline void write_fluid_files(const std::filesystem::path& dir, const std::string& stem, const Trajectory& tr,
                              const std::string& title) {
  write(dir, stem + ".csv", io::to_csv(tr));
  write(dir, stem + "_phase.svg", svg::phase_plot(tr, title + ": (delta, z21)"));
  write(dir, stem + "_delta.svg",
        svg::render({svg::extract(tr, "delta", [](const Sample& s) { return s.t; },
                                  [](const Sample& s) { return s.x.delta(); })},
                    {title + ": delta", "t", "delta", 720, 480}));
  write(dir, stem + "_queues.svg", svg::time_plot(tr, title + ": queues", false));
  write(dir, stem + "_sharing.svg", svg::time_plot(tr, title + ": shared occupancy", true));
}

}  // namespace detail

// Both rows of the equilibrium comparison plus the heuristic and the throughput check.
inline json table1(const std::filesystem::path& dir) {
  const ModelParams p = no_abandonment();
  const StateVector x0 = standard_start(p);
  json rep{{"target", "table1"}, {"params", io::to_json(p)}, {"start", io::to_json(x0)}};
  json rows = json::array();

  const ClassificationResult a = iterate_approx(x0.delta(), p);
  rep["approximation"] = io::to_json(a);
  if (a.periodic) {
    const auto& e = *a.periodic;
    rows.push_back(compare("approximation Delta*", e.delta_star, 8.802, 0.001));
    rows.push_back(compare("approximation z(T1)", e.z_at_T1, 0.9992, 0.0005));
    rows.push_back(compare("approximation T1", e.T_star[0], 7.093, 0.001));
    rows.push_back(compare("approximation T2", e.T_star[1], 46.044, 0.001));
  }
  const ClassificationResult f = iterate_periodic(x0.q1, x0.q2, x0.z21, p);
  rep["original"] = io::to_json(f);
  if (f.periodic) {
    const auto& e = *f.periodic;
    rows.push_back(compare("original Delta*", e.delta_star, 8.663, 0.005));
    rows.push_back(compare("original z(T1)", e.z_at_T1, 0.9992, 0.005));
    rows.push_back(compare("original T1", e.T_star[0], 7.270, 0.005));
    rows.push_back(compare("original T2", e.T_star[1], 46.044, 0.005));
  }
  // The stated start (q2 - q1 = 0.1) sits exactly on the threshold and is not a sharing start.
  rep["stated_start_delta_0_1"] = check_initial_condition(cycle_start(1.0, 1.1, 0.5 * p.tau, p), p).ok
                                      ? "admissible"
                                      : "not admissible: Delta(0) = kappa";

  const HeuristicResult h = heuristic_iterate(5.0, p);
  rep["heuristic"] = io::to_json(h.result);
  rep["heuristic_xi_star"] = io::num(h.xi_star);
  if (h.result.periodic) {
    rows.push_back(compare("heuristic Delta*", h.result.periodic->delta_star, 8.802, 0.01));
    const CollapseReport L = throughput_L(h.xi_star, p);
    rep["collapse"] = io::to_json(L);
    rep["collapse"]["L_reported"] = 0.44;
    rows.push_back(compare("L printed formula", L.L_printed, 0.44, 0.05));
    rows.push_back(compare("L closed form vs oracle", L.L_closed_form, L.L_oracle, 0.05));
  }
  rep["comparisons"] = rows;
  detail::write(dir, "table1.json", rep.dump(2) + "\n");
  return rep;
}

// Outward spiral to the periodic solution without abandonment; queues grow every cycle.
inline json fig3_6(const std::filesystem::path& dir) {
  const ModelParams p = no_abandonment();
  const StateVector x0 = standard_start(p);
  const Trajectory tr = simulate(x0, p, 1200.0, 0.05);
  detail::write_fluid_files(dir, "fig3_6", tr, "no abandonment, mu = 0.1");
  json rep{{"target", "fig3_6"}, {"params", io::to_json(p)}, {"start", io::to_json(x0)}};
  rep["cycles"] = tr.cycles.size();
  rep["hint"] = to_string(tr.hint);
  rep["alternations_band_0_5"] = oscillation_detector(tr, 0.5);
  rep["cycle_starts"] = detail::delta_at_cycle_starts(tr);
  detail::write(dir, "fig3_6.json", rep.dump(2) + "\n");
  return rep;
}

// Inward spiral for mu = 0.3; the classifier and the heuristic both stop.
inline json fig7_8(const std::filesystem::path& dir) {
  const ModelParams p = bifurcation();
  const StateVector x0 = bifurcation_start(p);
  const Trajectory tr = simulate(x0, p, 600.0, 0.05);
  detail::write_fluid_files(dir, "fig7_8", tr, "mu = 0.3");
  json rep{{"target", "fig7_8"}, {"params", io::to_json(p)}, {"start", io::to_json(x0)}};
  rep["cycles"] = tr.cycles.size();
  rep["hint"] = to_string(tr.hint);
  rep["classification"] = io::to_json(iterate_periodic(x0.q1, x0.q2, x0.z21, p));
  const HeuristicResult h = heuristic_iterate(x0.delta(), p);
  rep["heuristic"] = io::to_json(h.result);
  rep["heuristic_negative_iterate"] = h.result.delta_history.back() < 0.0;
  rep["final_state"] = io::to_json(tr.samples.back().x);
  detail::write(dir, "fig7_8.json", rep.dump(2) + "\n");
  return rep;
}

// Small abandonment: fluid against the jump system from the same queues.
inline json fig9_10(const std::filesystem::path& dir) {
  const ModelParams p = with_abandonment();
  const StateVector x0 = standard_start(p);
  const Trajectory tr = simulate(x0, p, 1200.0, 0.05);
  detail::write_fluid_files(dir, "fig9_10", tr, "mu = 0.1, theta = 0.01");
  StateVector xa = x0;
  xa.z12 = xa.z21 = 0.0;
  xa.z11 = xa.z22 = 1.0;
  const Trajectory ta = simulate_approx(xa, p, 1200.0, 0.05);
  detail::write(dir, "fig9_10_approx.csv", io::to_csv(ta));

  // Delta gap over the first fluid cycle, on grid times shared by both paths.
  double first_cycle_end = tr.cycles.empty() ? 0.0 : tr.cycles.front().Sigma[tr.cycles.front().intervals];
  double gap = 0.0;
  std::size_t j = 0;
  for (const auto& s : tr.samples) {
    if (s.t > first_cycle_end) break;
    while (j < ta.samples.size() && ta.samples[j].t < s.t - 1e-9) ++j;
    if (j < ta.samples.size() && std::abs(ta.samples[j].t - s.t) <= 1e-9)
      gap = std::max(gap, std::abs(ta.samples[j].x.delta() - s.x.delta()));
  }
  json rep{{"target", "fig9_10"}, {"params", io::to_json(p)}, {"start", io::to_json(x0)}};
  rep["cycles"] = tr.cycles.size();
  rep["classification"] = io::to_json(iterate_periodic(x0.q1, x0.q2, x0.z21, p));
  rep["first_cycle_end"] = io::num(first_cycle_end);
  rep["delta_sup_gap_first_cycle_vs_approx"] = io::num(gap);
  rep["cycle_starts"] = detail::delta_at_cycle_starts(tr);
  detail::write(dir, "fig9_10.json", rep.dump(2) + "\n");
  return rep;
}

// Two stochastic experiments at n = 100 whose fluid limits do not oscillate.
inline json sec7_4(const std::filesystem::path& dir, int seeds = 50) {
  json rep{{"target", "sec7_4"}};

  // Thresholds k = 10 at n = 100, started empty.
  const ModelParams p1 = with_abandonment();
  const CtmcParams c1 = CtmcParams::symmetric(p1, 100);
  const double horizon1 = 1000.0;
  std::vector<int> counts(static_cast<std::size_t>(seeds));
  parallel_for(counts.size(), [&](std::size_t i) {
    const Trajectory tr = simulate_ctmc(CtmcState{}, c1, horizon1, kBaseSeed + i, 0.5);
    counts[i] = oscillation_detector(tr, 0.3);
  });
  int reached = 0;
  for (int c : counts) reached += c >= 3 ? 1 : 0;
  const Trajectory first = simulate_ctmc(CtmcState{}, c1, horizon1, kBaseSeed, 0.5);
  detail::write(dir, "sec7_4_unstable.csv", io::to_csv(first, io::CtmcTag{100, kBaseSeed}));
  detail::write(dir, "sec7_4_unstable_sharing.svg", svg::time_plot(first, "n = 100, theta = 0.01, mu = 0.1", true));
  rep["unstable_stationary_point"] = {{"n", 100},
                                      {"horizon", horizon1},
                                      {"band", 0.3},
                                      {"seeds", seeds},
                                      {"alternations", counts},
                                      {"fraction_with_3_alternations", io::num(double(reached) / seeds)}};

  // mu = theta = 0.5, tau n = 1, k n = 10; Z21(0) = 20 recovering from overload in queue 2.
  const ModelParams p2 = no_oscillation();
  const CtmcParams c2 = CtmcParams::symmetric(p2, 100);
  CtmcState s2;
  s2.Z11 = 80;
  s2.Z21 = 20;
  s2.Z22 = 100;
  const Trajectory tr2 = simulate_ctmc(s2, c2, 1500.0, kBaseSeed, 0.5);
  detail::write(dir, "sec7_4_no_oscillation.csv", io::to_csv(tr2, io::CtmcTag{100, kBaseSeed}));
  detail::write(dir, "sec7_4_no_oscillation_sharing.svg", svg::time_plot(tr2, "mu = theta = 0.5", true));
  int late = 0;
  {
    Trajectory tail;
    for (const auto& s : tr2.samples)
      if (s.t >= 1000.0) tail.samples.push_back(s);
    late = oscillation_detector(tail, 0.1);
  }
  // Fluid counterpart from q1 = 1, q2 = 1000 does not keep oscillating.
  const StateVector xf = cycle_start(1.0, 1000.0, 0.0, p2);
  const Trajectory fl = simulate(xf, p2, 1500.0, 0.5);
  detail::write(dir, "sec7_4_fluid.csv", io::to_csv(fl));
  rep["no_oscillating_fluid"] = {{"n", 100},
                                 {"horizon", 1500.0},
                                 {"alternations_band_0_1", oscillation_detector(tr2, 0.1)},
                                 {"alternations_after_t_1000", late},
                                 {"fluid_classification", io::to_json(iterate_periodic(xf.q1, xf.q2, xf.z21, p2))},
                                 {"fluid_hint", to_string(fl.hint)},
                                 {"fluid_final_state", io::to_json(fl.samples.back().x)}};
  detail::write(dir, "sec7_4.json", rep.dump(2) + "\n");
  return rep;
}

// Certificate on Delta(0) in [4, 7], q1(0) = 1, plus ten sampled starts in the box.
inline json appendixA_example(const std::filesystem::path& dir) {
  const ModelParams p = with_abandonment();
  const OscillationCertificate c = certify_endless({4.0, 7.0}, {1.0, 1.0}, p);
  json rep{{"target", "appendixA_example"}, {"params", io::to_json(p)}, {"certificate", io::to_json(c)}};
  json rows = json::array();
  rows.push_back(compare("A_U constant", c.A_upper_constant, -0.891, 0.01));
  rows.push_back(compare("Delta_L(T1+T2) printed form", c.delta_next_lower_printed, 6.21, 0.01));
  rep["comparisons"] = rows;
  rep["delta_next_lower_rigorous"] = io::num(c.delta_next_bounds.lo);

  std::mt19937_64 rng(kBaseSeed);
  std::uniform_real_distribution<double> d(4.0, 7.0), z(0.0, p.tau);
  json starts = json::array();
  for (int i = 0; i < 10; ++i) {
    const double delta0 = d(rng);
    const double z0 = z(rng);
    const ClassificationResult r = iterate_periodic(1.0, 1.0 + delta0, z0, p);
    starts.push_back({{"delta0", io::num(delta0)}, {"z21_0", io::num(z0)}, {"verdict", to_string(r.verdict)}});
  }
  rep["sampled_starts"] = starts;
  detail::write(dir, "appendixA_example.json", rep.dump(2) + "\n");
  return rep;
}

inline json run(const std::string& target, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (target == "table1") return table1(dir);
  if (target == "fig3_6") return fig3_6(dir);
  if (target == "fig7_8") return fig7_8(dir);
  if (target == "fig9_10") return fig9_10(dir);
  if (target == "sec7_4") return sec7_4(dir);
  if (target == "appendixA_example") return appendixA_example(dir);
  throw precondition_error("unknown reproduction target '" + target + "'");
}

}  // namespace chatterlab::reproduce
