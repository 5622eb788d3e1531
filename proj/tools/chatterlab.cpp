// Command-line front end: fluid paths, equilibria, certificates, CTMC runs
// and the canned reproduction targets.
#include <chatterlab.hpp>
#include <chatterlab/reproduce.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace chatterlab;
using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNoConvergence = 3;

struct Options {
  std::string params_file;
  std::string out_dir;
  std::string format{"json"};
  double horizon{1200.0};
  double dt{0.05};
  std::uint64_t seed{reproduce::kBaseSeed};
  int reps{1};
  bool strict{false};
  std::string target{"all"};
};

// Config file: either a bare parameter object or {"params": {...}, "initial": {...}, ...}.
struct Config {
  ModelParams params{reproduce::no_abandonment()};
  std::optional<StateVector> initial;
  json raw = json::object();
};

Config load_config(const Options& o) {
  Config c;
  if (o.params_file.empty()) return c;
  c.raw = io::read_json_file(o.params_file);
  const json& pj = c.raw.contains("params") ? c.raw.at("params") : c.raw;
  c.params = io::params_from_json(pj);
  if (c.raw.contains("initial")) c.initial = io::state_from_json(c.raw.at("initial"));
  return c;
}

StateVector initial_or_default(const Config& c) {
  return c.initial ? *c.initial : reproduce::standard_start(c.params);
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

void check_params(const Config& c, const Options& o) {
  const auto rep = validate_params(c.params, o.strict);
  for (const auto& w : rep.warnings) std::cerr << "warning: assumption not met: " << w << '\n';
  if (!rep.valid) {
    std::string msg = "invalid parameters:";
    for (const auto& v : rep.violations) msg += " [" + v + "]";
    throw precondition_error(msg);
  }
}

void emit(const Options& o, const std::string& name, const std::string& text) {
  if (o.out_dir.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(o.out_dir);
  io::write_text_file((fs::path(o.out_dir) / name).string(), text);
}

int cmd_fluid(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  const Trajectory tr = simulate(initial_or_default(c), c.params, o.horizon, o.dt);
  if (o.format == "csv") {
    emit(o, "trajectory.csv", io::to_csv(tr));
  } else if (o.format == "svg") {
    emit(o, "phase.svg", svg::phase_plot(tr, "fluid path: (delta, z21)"));
  } else {
    json j{{"params", io::to_json(c.params)}, {"hint", to_string(tr.hint)}, {"samples", tr.samples.size()}};
    j["cycles"] = json::array();
    for (const auto& rec : tr.cycles) j["cycles"].push_back(io::to_json(rec));
    if (tr.sliding_time) j["sliding_time"] = io::num(*tr.sliding_time);
    emit(o, "cycles.json", j.dump(2) + "\n");
  }
  return kOk;
}

int cmd_periodic(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  const StateVector x = initial_or_default(c);
  const ClassificationResult r = iterate_periodic(x.q1, x.q2, x.z21, c.params);
  json j = io::to_json(r);
  j["params"] = io::to_json(c.params);
  emit(o, "periodic.json", j.dump(2) + "\n");
  return r.verdict == Verdict::undetermined ? kNoConvergence : kOk;
}

int cmd_approx(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  const double d0 = number_or(c.raw, "delta0", initial_or_default(c).delta());
  const ClassificationResult r = iterate_approx(d0, c.params);
  json j = io::to_json(r);
  j["params"] = io::to_json(c.params);
  if (c.params.mu < mu_roots(c.params.kappa, c.params.tau).mu1)
    j["rate_constants"] = io::to_json(contraction_rate(c.params, number_or(c.raw, "margin", 0.5)));
  emit(o, "approx.json", j.dump(2) + "\n");
  return r.verdict == Verdict::undetermined ? kNoConvergence : kOk;
}

int cmd_heuristic(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  const double d0 = number_or(c.raw, "delta0", 5.0);
  const HeuristicResult h = heuristic_iterate(d0, c.params);
  json j = io::to_json(h.result);
  j["xi_star"] = io::num(h.xi_star);
  j["xi_history"] = json::array();
  for (double x : h.xi_history) j["xi_history"].push_back(io::num(x));
  emit(o, "heuristic.json", j.dump(2) + "\n");
  return h.result.verdict == Verdict::undetermined ? kNoConvergence : kOk;
}

int cmd_collapse(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  const HeuristicResult h = heuristic_iterate(number_or(c.raw, "delta0", 5.0), c.params);
  if (h.result.verdict != Verdict::oscillatory) {
    json j{{"verdict", to_string(h.result.verdict)}, {"stop_reason", h.result.stop_reason}, {"collapse", false}};
    emit(o, "collapse.json", j.dump(2) + "\n");
    return h.result.verdict == Verdict::undetermined ? kNoConvergence : kOk;
  }
  json j = io::to_json(throughput_L(h.xi_star, c.params));
  j["L_reported"] = 0.44;
  emit(o, "collapse.json", j.dump(2) + "\n");
  return kOk;
}

int cmd_certify(const Options& o) {
  const Config c = load_config(o);
  check_params(c, o);
  auto range = [&](const char* key, Interval fallback) {
    if (!c.raw.contains(key)) return fallback;
    const auto& a = c.raw.at(key);
    return Interval{a.at(0).get<double>(), a.at(1).get<double>()};
  };
  const OscillationCertificate cert =
      certify_endless(range("delta_range", {4.0, 7.0}), range("q1_range", {1.0, 1.0}), c.params);
  emit(o, "certificate.json", io::to_json(cert).dump(2) + "\n");
  return kOk;
}

int cmd_ctmc(const Options& o) {
  const Config c = load_config(o);
  const int n = static_cast<int>(number_or(c.raw, "n", 100));
  const CtmcParams cp = CtmcParams::symmetric(c.params, n);
  const CtmcState x0 = c.initial ? CtmcState::from_fluid(*c.initial, n) : CtmcState{};
  if (o.reps < 1) throw precondition_error("--reps must be >= 1");
  for (int r = 0; r < o.reps; ++r) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(r);
    const Trajectory tr = simulate_ctmc(x0, cp, o.horizon, seed, o.dt);
    const std::string name = "ctmc_seed" + std::to_string(seed);
    if (o.format == "svg") emit(o, name + ".svg", svg::time_plot(tr, "shared occupancy", true));
    else emit(o, name + ".csv", io::to_csv(tr, io::CtmcTag{n, seed}));
  }
  return kOk;
}

int cmd_reproduce(const Options& o) {
  const fs::path dir = o.out_dir.empty() ? fs::path("reproduction") : fs::path(o.out_dir);
  std::vector<std::string> list;
  if (o.target == "all") list = reproduce::targets();
  else list.push_back(o.target);
  json summary = json::object();
  for (const auto& t : list) {
    const json rep = reproduce::run(t, dir / t);
    if (rep.contains("comparisons")) summary[t] = rep.at("comparisons");
    else summary[t] = "written";
  }
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switching fluid model of a two-class, two-pool overloaded network"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--params", o.params_file, "JSON file with parameters and optional initial state");
    sub->add_option("--out", o.out_dir, "output directory (stdout when omitted)");
    sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json", "svg"}));
    sub->add_flag("--strict", o.strict, "reject lambda > 1 - tau, theta >= mu and theta = 0");
  };
  auto* fluid = app.add_subcommand("fluid", "piecewise-exact fluid trajectory");
  auto* periodic = app.add_subcommand("periodic", "cycle iteration and classification");
  auto* approx = app.add_subcommand("approx", "jump-system fixed point and rate constants");
  auto* heuristic = app.add_subcommand("heuristic", "closed-form heuristic iteration");
  auto* certify = app.add_subcommand("certify", "endless-oscillation certificate");
  auto* ctmc = app.add_subcommand("ctmc", "stochastic simulation at scale n");
  auto* collapse = app.add_subcommand("collapse", "throughput and congestion-collapse check");
  auto* repro = app.add_subcommand("reproduce", "canned experiments with comparison reports");
  for (auto* s : {fluid, periodic, approx, heuristic, certify, ctmc, collapse, repro}) common(s);
  for (auto* s : {fluid, ctmc}) {
    s->add_option("--horizon", o.horizon, "time horizon")->check(CLI::NonNegativeNumber);
    s->add_option("--dt", o.dt, "sampling step")->check(CLI::PositiveNumber);
  }
  ctmc->add_option("--seed", o.seed, "base seed");
  ctmc->add_option("--reps", o.reps, "replications");
  repro->add_option("target", o.target, "table1, fig3_6, fig7_8, fig9_10, sec7_4, appendixA_example or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*fluid) return cmd_fluid(o);
    if (*periodic) return cmd_periodic(o);
    if (*approx) return cmd_approx(o);
    if (*heuristic) return cmd_heuristic(o);
    if (*certify) return cmd_certify(o);
    if (*ctmc) return cmd_ctmc(o);
    if (*collapse) return cmd_collapse(o);
    if (*repro) return cmd_reproduce(o);
  } catch (const precondition_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kValidation;
}
