#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "approx_system.hpp"
#include "core_model.hpp"
#include "ctmc_sim.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "fluid_engine.hpp"
#include "numerics.hpp"

namespace chatterlab::io {

using json = nlohmann::json;

// Every number leaves the library with 9 significant digits.
inline double num(double v) { return numerics::round_significant(v, 9); }

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline json to_json(const ModelParams& p) {
  return {{"lambda", num(p.lambda)}, {"mu", num(p.mu)}, {"theta", num(p.theta)},
          {"kappa", num(p.kappa)}, {"tau", num(p.tau)}};
}

inline json to_json(const StateVector& x) {
  return {{"q1", num(x.q1)},   {"q2", num(x.q2)},   {"z11", num(x.z11)},
          {"z12", num(x.z12)}, {"z21", num(x.z21)}, {"z22", num(x.z22)}};
}

inline double field(const json& j, const char* key) {
  if (!j.contains(key)) throw precondition_error(std::string("missing field '") + key + "'");
  if (!j.at(key).is_number()) throw precondition_error(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline ModelParams params_from_json(const json& j) {
  return {field(j, "lambda"), field(j, "mu"), field(j, "theta"), field(j, "kappa"), field(j, "tau")};
}

inline StateVector state_from_json(const json& j) {
  return {field(j, "q1"), field(j, "q2"), field(j, "z11"), field(j, "z12"), field(j, "z21"), field(j, "z22")};
}

inline json interval_json(const Interval& i) { return json::array({num(i.lo), num(i.hi)}); }

inline json to_json(const CycleRecord& c) {
  json j;
  j["T"] = json::array();
  for (std::size_t i = 0; i < c.intervals; ++i) j["T"].push_back(num(c.T[i]));
  j["Sigma"] = json::array();
  for (std::size_t i = 0; i <= c.intervals; ++i) j["Sigma"].push_back(num(c.Sigma[i]));
  j["states_at_switch"] = json::array();
  for (const auto& x : c.states_at_switch) j["states_at_switch"].push_back(to_json(x));
  j["sigma_q"] = c.sigma_q ? json(num(*c.sigma_q)) : json(nullptr);
  j["terminated_by"] = to_string(c.terminated_by);
  j["starts_mirrored"] = c.starts_mirrored;
  return j;
}

inline json to_json(const PeriodicEquilibrium& e) {
  json j{{"delta_star", num(e.delta_star)},
         {"z21_star", num(e.z21_star)},
         {"z_at_T1", num(e.z_at_T1)},
         {"T_star", {num(e.T_star[0]), num(e.T_star[1]), num(e.T_star[2]), num(e.T_star[3])}},
         {"period", num(e.period)},
         {"closure_residual", num(e.closure_residual)},
         {"closure_residual_full", num(e.closure_residual_full)}};
  j["state_at_switch"] = json::array();
  for (const auto& x : e.state_at_switch) j["state_at_switch"].push_back(to_json(x));
  return j;
}

inline json to_json(const ClassificationResult& r) {
  json j{{"verdict", to_string(r.verdict)}, {"iterations_used", r.iterations_used}, {"stop_reason", r.stop_reason}};
  j["periodic"] = r.periodic ? to_json(*r.periodic) : json(nullptr);
  j["delta_history"] = json::array();
  for (double d : r.delta_history) j["delta_history"].push_back(num(d));
  if (!r.start_history.empty()) {
    j["cycle_start_queues"] = json::array();
    for (const auto& x : r.start_history) j["cycle_start_queues"].push_back({num(x.q1), num(x.q2)});
  }
  if (!r.accelerated.empty()) j["accelerated_indices"] = r.accelerated;
  return j;
}

inline json to_json(const OscillationCertificate& c) {
  json j{{"delta_bounds", interval_json(c.delta_bounds)},
         {"q1_bounds", interval_json(c.q1_bounds)},
         {"psi_lower", num(c.psi.lower)},
         {"psi_upper", num(c.psi.upper)},
         {"psi_lower_printed", num(c.psi.printed_lower)},
         {"t1_bounds", interval_json(c.t1_bounds)},
         {"z21_at_T1", interval_json(c.z21_at_T1)},
         {"t2_bounds", interval_json(c.t2_bounds)},
         {"z12_at_sigma2", interval_json(c.z12_at_sigma2)},
         {"A_bounds", interval_json(c.A_bounds)},
         {"A_upper_constant", num(c.A_upper_constant)},
         {"delta_next_bounds", interval_json(c.delta_next_bounds)},
         {"delta_next_lower_printed", num(c.delta_next_lower_printed)},
         {"q1_at_T1_lower", num(c.q1_at_T1_lower)},
         {"q_next_bounds", interval_json(c.q_next_bounds)},
         {"q_next_lower_printed", num(c.q_next_lower_printed)},
         {"release_condition", c.release_condition},
         {"queue_positivity", c.queue_positivity},
         {"A_negative", c.A_negative},
         {"contained", c.contained},
         {"verdict", c.verdict}};
  j["nested_bounds_trace"] = json::array();
  for (const auto& s : c.nested_bounds_trace)
    j["nested_bounds_trace"].push_back({{"delta", interval_json(s.delta)}, {"q1", interval_json(s.q1)}});
  return j;
}

inline json to_json(const RateConstants& r) {
  return {{"mu1", num(r.mu1)},
          {"mu2", num(r.mu2)},
          {"c", num(r.c)},
          {"delta_max", num(r.delta_max)},
          {"delta_mu", num(r.delta_mu)},
          {"S", interval_json(r.S)},
          {"lipschitz_K", num(r.lipschitz_K)},
          {"rho", num(r.rho)},
          {"lipschitz_K_printed", num(r.lipschitz_K_printed)},
          {"rho_printed", num(r.rho_printed)},
          {"R", num(r.R)},
          {"beta", num(r.beta)},
          {"vartheta", num(r.vartheta)},
          {"epsilon_guard", num(r.epsilon_guard)},
          {"maps_into_itself", r.maps_into_itself},
          {"contraction_certified", r.contraction_certified}};
}

inline json to_json(const CollapseReport& c) {
  return {{"xi_star", num(c.xi_star)},         {"lambda", num(c.lambda)},
          {"L_closed_form", num(c.L_closed_form)}, {"L_printed_formula", num(c.L_printed)},
          {"L_oracle", num(c.L_oracle)},       {"delta_star", num(c.delta_star)},
          {"cycle_length", num(c.cycle_length)}, {"collapse", c.collapse}};
}

inline json to_json(const GapRow& g) {
  json j{{"n", g.n}, {"median", num(g.median)}, {"q1", num(g.q1)}, {"q3", num(g.q3)}};
  j["gaps"] = json::array();
  for (double v : g.gaps) j["gaps"].push_back(num(v));
  return j;
}

// Reads a JSON document; a file that cannot be opened or parsed is a precondition error.
inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw precondition_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw precondition_error("cannot parse '" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// Tag for CTMC sample paths: two extra columns n and seed.
struct CtmcTag {
  int n{0};
  std::uint64_t seed{0};
};

// delta is taken from the printed q columns so that a parsed file writes back byte for byte.
inline void write_csv(std::ostream& os, const Trajectory& tr, std::optional<CtmcTag> tag = std::nullopt) {
  os << "t,q1,q2,z11,z12,z21,z22,delta,phase";
  if (tag) os << ",n,seed";
  os << '\n';
  for (const auto& s : tr.samples) {
    const auto& x = s.x;
    os << fmt(s.t) << ',' << fmt(x.q1) << ',' << fmt(x.q2) << ',' << fmt(x.z11) << ',' << fmt(x.z12) << ','
       << fmt(x.z21) << ',' << fmt(x.z22) << ',' << fmt(num(x.q2) - num(x.q1)) << ',' << to_string(s.phase);
    if (tag) os << ',' << tag->n << ',' << tag->seed;
    os << '\n';
  }
}

inline std::string to_csv(const Trajectory& tr, std::optional<CtmcTag> tag = std::nullopt) {
  std::ostringstream os;
  write_csv(os, tr, tag);
  return os.str();
}

/**
 * @brief Parses a trajectory CSV. The delta column is derived data and is
 * not stored; the n and seed columns are returned in `tag`.
 */
inline Trajectory read_csv(std::istream& is, std::optional<CtmcTag>* tag = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw precondition_error("read_csv: empty input");
  const bool has_tag = line == "t,q1,q2,z11,z12,z21,z22,delta,phase,n,seed";
  if (!has_tag && line != "t,q1,q2,z11,z12,z21,z22,delta,phase")
    throw precondition_error("read_csv: unexpected header '" + line + "'");
  Trajectory tr;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != (has_tag ? 11u : 9u))
      throw precondition_error("read_csv: wrong column count on row " + std::to_string(row));
    double v[8];
    for (int i = 0; i < 8; ++i) {
      char* end = nullptr;
      v[i] = std::strtod(cells[static_cast<std::size_t>(i)].c_str(), &end);
      if (end == cells[static_cast<std::size_t>(i)].c_str() || *end != '\0')
        throw precondition_error("read_csv: bad number on row " + std::to_string(row));
    }
    Sample s;
    s.t = v[0];
    s.x = {v[1], v[2], v[3], v[4], v[5], v[6]};
    s.phase = phase_from_string(cells[8]);
    if (!tr.samples.empty() && !(s.t > tr.samples.back().t))
      throw precondition_error("read_csv: times must increase (row " + std::to_string(row) + ")");
    tr.samples.push_back(s);
    if (has_tag && tag) *tag = CtmcTag{std::stoi(cells[9]), std::stoull(cells[10])};
  }
  return tr;
}

inline Trajectory from_csv(const std::string& text, std::optional<CtmcTag>* tag = nullptr) {
  std::istringstream is(text);
  return read_csv(is, tag);
}

}  // namespace chatterlab::io
