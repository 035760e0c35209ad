#pragma once

#include <random>

#include "qbmaser/qbmaser.hpp"

namespace test_util {

using namespace qbmaser;

// the default pentacene parameter set used across the tests
inline PhysicalParameters pentacene_defaults() {
  PhysicalParameters p;
  p.omega_m = two_pi * 1.45e9;
  p.omega_35 = two_pi * 1.45e9;
  p.g_35 = two_pi * 3.66e-2;
  p.n_pen = 1e17;
  p.pump_power = 2e4;
  p.xi_per_watt = 3.1e3;
  p.k_sp = 4.2e7;
  p.k_23 = 5.52e6;
  p.k_24 = 1.1e7;
  p.k_25 = 5.24e7;
  p.k_31 = 2.0e3;
  p.k_41 = 1.4e4;
  p.k_51 = 2.2e4;
  p.k_34 = 2.8e4;
  p.k_43 = 2.8e4;
  p.k_35 = 1.1e4;
  p.k_53 = 1.1e4;
  p.k_45 = 4.0e3;
  p.k_54 = 4.0e3;
  p.chi_34 = two_pi * 1.8e5;
  p.chi_35 = two_pi * 1.8e5;
  p.chi_45 = two_pi * 1.8e5;
  p.kappa_0 = two_pi * 1.0e6;
  p.n_th = 4000;
  return p;
}

inline ScheduleConfig default_schedule(Scheme scheme = Scheme::instantaneous) {
  ScheduleConfig c;
  c.scheme = scheme;
  c.kappa_high = two_pi * 1.45e9;
  c.kappa_low = two_pi * 9.55e6;
  c.tau_1 = 1e-8;
  if (scheme != Scheme::instantaneous) {
    c.tau_down = 2.0 / c.kappa_low;
    c.tau_up = c.tau_down;
  }
  c.termination.mode = Termination::Mode::threshold;
  c.termination.threshold_photons = 1e10;
  c.n_cycles = 20;
  return c;
}

inline StateVec random_state(std::mt19937& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  StateVec y{};
  double trace = 0.0;
  for (int i = iP1; i <= iP5; ++i) {
    y[i] = u01(rng);
    trace += y[i];
  }
  for (int i = iP1; i <= iP5; ++i) y[i] /= trace;
  y[iNph] = std::pow(10.0, 12.0 * u01(rng)); // 1 .. 1e12 photons
  y[iCohRe] = sym(rng) * 1e3;
  y[iCohIm] = sym(rng) * 1e3;
  y[iCorr] = sym(rng) * 1e-3;
  return y;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

}  // namespace test_util
