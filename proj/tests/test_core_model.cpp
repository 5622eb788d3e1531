#include <catch_amalgamated.hpp>

#include <chatterlab/core_model.hpp>

#include <algorithm>
#include <random>
#include <string>

using namespace chatterlab;

namespace {

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

StateVector random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> q(0.0, 50.0), z(0.0, 1.0);
  return {q(rng), q(rng), z(rng), z(rng), z(rng), z(rng)};
}

}  // namespace

TEST_CASE("validate_params accepts the abandonment preset in strict mode") {
  const auto r = validate_params({0.98, 0.1, 0.01, 0.1, 0.01}, true);
  CHECK(r.valid);
  CHECK(r.violations.empty());
  CHECK(r.warnings.empty());
}

TEST_CASE("theta = 0 is a strict violation but only a warning in limit mode") {
  const ModelParams p{0.98, 0.1, 0.0, 0.1, 0.01};
  const auto strict = validate_params(p, true);
  CHECK_FALSE(strict.valid);
  CHECK(mentions(strict.violations, "theta > 0"));
  const auto limit = validate_params(p, false);
  CHECK(limit.valid);
  CHECK(mentions(limit.warnings, "theta > 0"));
}

TEST_CASE("lambda above 1 - tau is rejected in strict mode") {
  const auto r = validate_params({1.0, 0.1, 0.01, 0.1, 0.01}, true);
  CHECK_FALSE(r.valid);
  CHECK(mentions(r.violations, "lambda <= 1 - tau"));
}

TEST_CASE("hard constraints are violations in either mode") {
  for (bool strict : {false, true}) {
    CHECK_FALSE(validate_params({0.98, 1.0, 0.01, 0.1, 0.01}, strict).valid);
    CHECK_FALSE(validate_params({0.98, 0.1, -0.1, 0.1, 0.01}, strict).valid);
    CHECK_FALSE(validate_params({0.98, 0.1, 0.01, 0.0, 0.01}, strict).valid);
    CHECK_FALSE(validate_params({0.98, 0.1, 0.01, 0.1, 0.0}, strict).valid);
    CHECK_FALSE(validate_params({0.98, 0.1, 0.01, 0.1, 1.0}, strict).valid);
    CHECK_FALSE(validate_params({0.98, std::nan(""), 0.01, 0.1, 0.01}, strict).valid);
  }
  CHECK_THROWS_AS(require_valid({0.98, 1.5, 0.0, 0.1, 0.01}), precondition_error);
  CHECK_NOTHROW(require_valid({0.98, 0.1, 0.0, 0.1, 0.01}));
}

TEST_CASE("theta >= mu is reported") {
  const ModelParams p{0.98, 0.5, 0.5, 0.1, 0.01};
  CHECK_FALSE(validate_params(p, true).valid);
  CHECK(mentions(validate_params(p, false).warnings, "theta < mu"));
}

TEST_CASE("check_initial_condition") {
  const ModelParams p{0.98, 0.1, 0.0, 0.1, 0.01};

  SECTION("q2 - q1 = 0.2 exceeds kappa") {
    const StateVector x{1.0, 1.2, 0.995, 0.01, 0.005, 0.99};
    CHECK(check_initial_condition(x, p).ok);
  }
  SECTION("difference below kappa") {
    const StateVector x{1.0, 1.05, 1.0, p.tau, 0.0, 1.0 - p.tau};
    const auto c = check_initial_condition(x, p);
    CHECK_FALSE(c.ok);
    CHECK(mentions(c.diagnostics, "q2 > q1 + kappa"));
  }
  SECTION("difference exactly kappa is not a sharing start") {
    const StateVector x{1.0, 1.1, 1.0, p.tau, 0.0, 1.0 - p.tau};
    CHECK_FALSE(check_initial_condition(x, p).ok);
  }
  SECTION("z21 must be strictly below tau") {
    const StateVector x{1.0, 5.0, 1.0 - p.tau, p.tau, p.tau, 1.0 - p.tau};
    const auto c = check_initial_condition(x, p);
    CHECK_FALSE(c.ok);
    CHECK(mentions(c.diagnostics, "z21 < tau"));
  }
  SECTION("z12 must equal tau") {
    const StateVector x{1.0, 5.0, 1.0, 0.0, 0.0, 1.0};
    CHECK_FALSE(check_initial_condition(x, p).ok);
  }
  SECTION("pools must be full") {
    const StateVector x{1.0, 5.0, 0.9, p.tau, 0.0, 1.0 - p.tau};
    CHECK_FALSE(check_initial_condition(x, p).ok);
  }
  SECTION("empty queue 1") {
    const StateVector x{0.0, 5.0, 1.0, p.tau, 0.0, 1.0 - p.tau};
    CHECK_FALSE(check_initial_condition(x, p).ok);
  }
}

TEST_CASE("mirror swaps the class and pool labels") {
  const StateVector x{1.0, 2.0, 0.1, 0.2, 0.3, 0.4};
  const StateVector m = mirror(x);
  CHECK(m.q1 == 2.0);
  CHECK(m.q2 == 1.0);
  CHECK(m.z11 == 0.4);
  CHECK(m.z12 == 0.3);
  CHECK(m.z21 == 0.2);
  CHECK(m.z22 == 0.1);

  const StateVector sym{3.0, 3.0, 0.7, 0.2, 0.2, 0.7};
  CHECK(mirror(sym) == sym);
}

TEST_CASE("mirror is an involution on random states") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const StateVector x = random_state(rng);
    REQUIRE(mirror(mirror(x)) == x);
    REQUIRE(mirror(x).delta() == -x.delta());
  }
}

TEST_CASE("d12 + d21 = -2 kappa on random states") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> k(1e-3, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const StateVector x = random_state(rng);
    const ModelParams p{0.9, 0.2, 0.01, k(rng), 0.01};
    REQUIRE(x.d12(p.kappa) + x.d21(p.kappa) == Catch::Approx(-2.0 * p.kappa).margin(1e-12));
  }
}

TEST_CASE("phase names round trip") {
  for (Phase ph : {Phase::interval1, Phase::interval2, Phase::interval3, Phase::interval4, Phase::relaxation,
                   Phase::sliding_detected}) {
    CHECK(phase_from_string(to_string(ph)) == ph);
  }
  CHECK_THROWS_AS(phase_from_string("I7"), precondition_error);
}

TEST_CASE("sup_distance and pools_full") {
  const StateVector a{1.0, 2.0, 0.9, 0.1, 0.1, 0.9};
  StateVector b = a;
  b.q2 += 0.5;
  CHECK(sup_distance(a, b) == Catch::Approx(0.5));
  CHECK(a.pools_full());
  b.z11 = 0.5;
  CHECK_FALSE(b.pools_full());
}

TEST_CASE("require_well_formed rejects broken states") {
  CHECK_NOTHROW(require_well_formed({1.0, 1.0, 0.5, 0.5, 0.5, 0.5}, "t"));
  CHECK_THROWS_AS(require_well_formed({-1.0, 1.0, 0.5, 0.5, 0.5, 0.5}, "t"), precondition_error);
  CHECK_THROWS_AS(require_well_formed({1.0, 1.0, 1.5, 0.0, 0.0, 0.5}, "t"), precondition_error);
  CHECK_THROWS_AS(require_well_formed({1.0, 1.0, 0.8, 0.5, 0.5, 0.5}, "t"), precondition_error);
}
