#pragma once

#include <cmath>
#include <stdexcept>

#include "qbmaser/constants.hpp"
#include "qbmaser/parameters.hpp"
#include "qbmaser/state.hpp"

namespace qbmaser {

// Time derivative of the mean-field state at total cavity loss rate `kappa`.
//
// Populations exchange with the field through the rate 2 g Im<a+ s35>; the
// same quantity scaled by n_pen feeds the photon number, so the coupling
// contribution to d(n_ph) is exactly -n_pen times the one to d(p5). Pump,
// intersystem crossing, depopulation and spin-lattice terms are written as
// shared one-way fluxes so the five population derivatives sum to zero at
// roundoff level.
inline StateVec rhs(const StateVec& y, double kappa,
                    const PhysicalParameters& p) {
  const double xi = p.pump_rate();
  const double g = p.g_35;
  const double exchange = 2.0 * g * y[iCohIm]; // 5->3 transfer rate per spin

  const double f12 = xi * y[iP1];
  const double f21 = (xi + p.k_sp) * y[iP2];
  const double f23 = p.k_23 * y[iP2];
  const double f24 = p.k_24 * y[iP2];
  const double f25 = p.k_25 * y[iP2];
  const double f31 = p.k_31 * y[iP3];
  const double f41 = p.k_41 * y[iP4];
  const double f51 = p.k_51 * y[iP5];
  const double f34 = p.k_34 * y[iP3];
  const double f43 = p.k_43 * y[iP4];
  const double f35 = p.k_35 * y[iP3];
  const double f53 = p.k_53 * y[iP5];
  const double f45 = p.k_45 * y[iP4];
  const double f54 = p.k_54 * y[iP5];

  StateVec d{};
  d[iP1] = f21 + f31 + f41 + f51 - f12;
  d[iP2] = f12 - f21 - f23 - f24 - f25;
  d[iP3] = exchange + f23 + f43 + f53 - f31 - f34 - f35;
  d[iP4] = f24 + f34 + f54 - f41 - f43 - f45;
  d[iP5] = f25 + f35 + f45 - f51 - f53 - f54 - exchange;

  d[iNph] = p.n_pen * exchange - kappa * y[iNph];
  if (p.include_thermal_photons) d[iNph] += kappa * p.n_th;

  const double detuning = p.omega_m - p.omega_35; // zero at resonance
  const double gamma_c = p.coherence_damping() + 0.5 * kappa;
  const double drive =
      g * ((1.0 + y[iNph]) * y[iP5] - y[iNph] * y[iP3]) +
      g * (p.n_pen - 1.0) * y[iCorr];
  d[iCohRe] = -detuning * y[iCohIm] - gamma_c * y[iCohRe];
  d[iCohIm] = detuning * y[iCohRe] + drive - gamma_c * y[iCohIm];

  d[iCorr] = 2.0 * g * (y[iP5] - y[iP3]) * y[iCohIm] -
             p.correlation_damping() * y[iCorr];
  return d;
}

// stored battery energy E = n_pen hbar w35 <s55>
inline double battery_energy(const StateVec& y, const PhysicalParameters& p) {
  return p.n_pen * hbar * p.omega_35 * y[iP5];
}

// signed instantaneous battery power Edot, evaluated through the model
// derivative (no numerical differentiation); metrics report its magnitude
inline double instantaneous_power(const StateVec& y, double kappa,
                                  const PhysicalParameters& p) {
  return p.n_pen * hbar * p.omega_35 * rhs(y, kappa, p)[iP5];
}

// k_c = kappa_e / kappa_0 = kappa / kappa_0 - 1
inline double coupling_coefficient(double kappa, double kappa_0) {
  if (!(kappa_0 > 0.0))
    throw std::invalid_argument("coupling_coefficient: kappa_0 must be > 0");
  if (kappa < kappa_0)
    throw std::invalid_argument(
        "coupling_coefficient: undercoupled below internal loss");
  return kappa / kappa_0 - 1.0;
}

// P_out = n_ph hbar w_m kappa k_c / (1 + k_c); algebraically equal to
// n_ph hbar w_m (kappa - kappa_0)
inline double output_power(double n_ph, double kappa,
                           const PhysicalParameters& p) {
  const double k_c = coupling_coefficient(kappa, p.kappa_0);
  return n_ph * hbar * p.omega_m * kappa * k_c / (1.0 + k_c);
}

}  // namespace qbmaser
