#pragma once
// Independent reference computations used by the tests. Nothing here calls
// the closed forms of the library; the vector fields are written out from
// the routing rules directly.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <chatterlab/core_model.hpp>

namespace oracle {

using chatterlab::ModelParams;
using chatterlab::StateVector;
using Vec = std::array<double, 6>;  // q1, q2, z11, z12, z21, z22

enum class Mode { share_to_2, release_1, share_to_1, release_2 };

// Right-hand side of the fluid equations with both pools full.
inline Vec field(const Vec& x, Mode m, const ModelParams& p) {
  const double q1 = x[0], q2 = x[1], z11 = x[2], z12 = x[3], z21 = x[4], z22 = x[5];
  const double mu = p.mu;
  // Rates at which agents become free in each pool.
  const double free1 = z11 + mu * z21;
  const double free2 = z22 + mu * z12;
  Vec d{};
  switch (m) {
    case Mode::share_to_2:  // every freed agent takes class 2
      d = {p.lambda - p.theta * q1, p.lambda - p.theta * q2 - free1 - free2, -z11, -mu * z12, z11 + 0.0, mu * z12};
      d[4] = free1 - mu * z21;
      break;
    case Mode::share_to_1:
      d = {p.lambda - p.theta * q1 - free1 - free2, p.lambda - p.theta * q2, mu * z21, 0.0, -mu * z21, -z22};
      d[3] = free2 - mu * z12;
      break;
    case Mode::release_1:
    case Mode::release_2:  // freed agents take their own class
      d = {p.lambda - p.theta * q1 - free1, p.lambda - p.theta * q2 - free2, mu * z21, -mu * z12, -mu * z21,
           mu * z12};
      break;
  }
  return d;
}

inline Vec rk4_step(const Vec& x, double h, Mode m, const ModelParams& p) {
  auto add = [](const Vec& a, const Vec& b, double s) {
    Vec r;
    for (int i = 0; i < 6; ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const Vec k1 = field(x, m, p);
  const Vec k2 = field(add(x, k1, h / 2), m, p);
  const Vec k3 = field(add(x, k2, h / 2), m, p);
  const Vec k4 = field(add(x, k3, h), m, p);
  Vec r;
  for (int i = 0; i < 6; ++i) r[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return r;
}

// Switching function: the current mode ends when it turns nonpositive.
inline double guard(const Vec& x, Mode m, const ModelParams& p) {
  switch (m) {
    case Mode::share_to_2: return (x[1] - x[0]) - p.kappa;
    case Mode::release_1: return x[4] - p.tau;
    case Mode::share_to_1: return (x[0] - x[1]) - p.kappa;
    case Mode::release_2: return x[3] - p.tau;
  }
  return 0.0;
}

inline Mode next_mode(Mode m) {
  switch (m) {
    case Mode::share_to_2: return Mode::release_1;
    case Mode::release_1: return Mode::share_to_1;
    case Mode::share_to_1: return Mode::release_2;
    case Mode::release_2: return Mode::share_to_2;
  }
  return m;
}

inline Vec to_vec(const StateVector& s) { return {s.q1, s.q2, s.z11, s.z12, s.z21, s.z22}; }
inline StateVector to_state(const Vec& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

struct SwitchingRun {
  std::vector<double> times;       // grid times k * grid_dt
  std::vector<StateVector> states; // state at each grid time
  std::vector<double> switches;    // located switching epochs
};

/**
 * @brief RK4 with fixed step h through the four-mode cycle, locating each
 * switching epoch by bisection on the substep length. States are recorded
 * at multiples of grid_dt (which should be a multiple of h).
 */
inline SwitchingRun integrate_cycle(const StateVector& x0, const ModelParams& p, double t_end, double h,
                                    double grid_dt, int max_switches = 4) {
  SwitchingRun run;
  Vec x = to_vec(x0);
  Mode m = Mode::share_to_2;
  double t = 0.0;
  long next_grid = 0;
  run.times.push_back(0.0);
  run.states.push_back(x0);
  next_grid = 1;
  int switches = 0;
  while (t < t_end - 1e-12) {
    const double t_grid = next_grid * grid_dt;
    double step = std::min(h, t_grid - t);
    if (step <= 1e-14) {
      ++next_grid;
      continue;
    }
    Vec y = rk4_step(x, step, m, p);
    if (switches < max_switches && guard(y, m, p) <= 0.0 && guard(x, m, p) > 0.0) {
      double lo = 0.0, hi = step;
      for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (guard(rk4_step(x, mid, m, p), m, p) > 0.0) lo = mid; else hi = mid;
      }
      x = rk4_step(x, hi, m, p);
      t += hi;
      run.switches.push_back(t);
      m = next_mode(m);
      ++switches;
      if (std::abs(t - t_grid) < 1e-13) {
        run.times.push_back(t_grid);
        run.states.push_back(to_state(x));
        ++next_grid;
      }
      continue;
    }
    x = y;
    t += step;
    if (std::abs(t - t_grid) < 1e-12) {
      t = t_grid;
      run.times.push_back(t);
      run.states.push_back(to_state(x));
      ++next_grid;
    }
  }
  return run;
}

// Generic scalar RK4 integration of y' = f(t, y) from 0 to T.
inline double rk4_scalar(const std::function<double(double, double)>& f, double y0, double T, double h) {
  double y = y0, t = 0.0;
  const long n = static_cast<long>(std::ceil(T / h - 1e-9));
  const double s = T / n;
  for (long i = 0; i < n; ++i) {
    const double k1 = f(t, y);
    const double k2 = f(t + s / 2, y + s / 2 * k1);
    const double k3 = f(t + s / 2, y + s / 2 * k2);
    const double k4 = f(t + s, y + s * k3);
    y += s / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += s;
  }
  return y;
}

// First sign change of f on a dense grid over [a, b], refined by bisection.
inline double grid_scan_root(const std::function<double(double)>& f, double a, double b, int points = 100000) {
  double x0 = a, f0 = f(a);
  for (int i = 1; i <= points; ++i) {
    const double x1 = a + (b - a) * i / points;
    const double f1 = f(x1);
    if ((f0 > 0) != (f1 > 0)) {
      double lo = x0, hi = x1;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        if ((f(mid) > 0) == (f0 > 0)) lo = mid; else hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    x0 = x1;
    f0 = f1;
  }
  return std::nan("");
}

// Stationary mean number in system of an M/M/n+M queue, truncated far in the tail.
inline double erlang_a_mean(double lambda, double mu, double theta, int n) {
  const int K = n + 20000;
  std::vector<double> w(static_cast<std::size_t>(K) + 1);
  w[0] = 1.0;
  double total = 1.0;
  for (int k = 1; k <= K; ++k) {
    const double death = std::min(k, n) * mu + std::max(k - n, 0) * theta;
    w[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k - 1)] * lambda / death;
    total += w[static_cast<std::size_t>(k)];
    if (w[static_cast<std::size_t>(k)] < 1e-300) break;
  }
  double mean = 0.0;
  for (int k = 0; k <= K; ++k) mean += k * w[static_cast<std::size_t>(k)];
  return mean / total;
}

}  // namespace oracle
