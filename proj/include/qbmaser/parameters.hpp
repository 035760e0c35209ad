#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbmaser/constants.hpp"

namespace qbmaser {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Physical parameter set of the five-level pentacene battery coupled to one
// cavity mode. Quantities that configs list as value/2pi (frequencies,
// couplings, dephasings, cavity loss rates) are stored here already multiplied
// by 2*pi, i.e. as angular rates in rad/s. Plain first-order rates (k_*) are
// stored in 1/s as given.
struct PhysicalParameters {
  double omega_m = 0.0;     // cavity mode frequency, rad/s
  double omega_35 = 0.0;    // |3>-|5> spin transition frequency, rad/s
  double g_35 = 0.0;        // single spin-photon coupling, rad/s
  double n_pen = 0.0;       // number of spins
  double pump_power = 0.0;  // optical pump power, W
  double xi_per_watt = 0.0; // pumping-rate coefficient, 1/s per W

  double k_sp = 0.0;                           // spontaneous emission |2>->|1>
  double k_23 = 0.0, k_24 = 0.0, k_25 = 0.0;   // intersystem crossing feeds
  double k_31 = 0.0, k_41 = 0.0, k_51 = 0.0;   // triplet depopulation
  double k_34 = 0.0, k_43 = 0.0;               // spin-lattice relaxation
  double k_35 = 0.0, k_53 = 0.0;
  double k_45 = 0.0, k_54 = 0.0;
  double chi_34 = 0.0, chi_35 = 0.0, chi_45 = 0.0; // dephasing, 1/s

  double kappa_0 = 0.0;      // internal cavity loss, rad/s
  double n_th = 0.0;         // thermal photon occupation (not used in the
                             // default dynamics; see include_thermal_photons)
  double temperature = 293.0; // K, metadata only
  bool include_thermal_photons = false;

  // xi, the optical pumping rate |1>->|2|
  double pump_rate() const { return xi_per_watt * pump_power; }

  // damping of <a+ s35> excluding the kappa/2 part (which is time dependent)
  double coherence_damping() const {
    return 0.5 * (k_31 + k_51 + k_34 + k_35 + k_53 + k_54) + 0.25 * chi_34 +
           chi_35 + 0.25 * chi_45;
  }

  // damping of the two-spin correlation <s1_53 s2_35>
  double correlation_damping() const {
    return (k_31 + k_51 + k_34 + k_35 + k_53 + k_54) + 0.5 * chi_34 +
           2.0 * chi_35 + 0.5 * chi_45;
  }
};

// Checks positivity and the few structural constraints. kappa_low is needed
// for the cross-check that the output coupling stays positive during the low
// phase. Throws ConfigError listing every offending field.
inline void validate_parameters(const PhysicalParameters& p, double kappa_low) {
  std::vector<std::string> bad;
  auto need_positive = [&bad](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      bad.push_back(std::string(name) + ": non-positive rate or value");
  };
  need_positive(p.omega_m, "omega_m");
  need_positive(p.omega_35, "omega_35");
  need_positive(p.g_35, "g_35");
  need_positive(p.pump_power, "pump_power");
  need_positive(p.xi_per_watt, "xi_per_watt");
  need_positive(p.k_sp, "k_sp");
  need_positive(p.k_23, "k_23");
  need_positive(p.k_24, "k_24");
  need_positive(p.k_25, "k_25");
  need_positive(p.k_31, "k_31");
  need_positive(p.k_41, "k_41");
  need_positive(p.k_51, "k_51");
  need_positive(p.k_34, "k_34");
  need_positive(p.k_43, "k_43");
  need_positive(p.k_35, "k_35");
  need_positive(p.k_53, "k_53");
  need_positive(p.k_45, "k_45");
  need_positive(p.k_54, "k_54");
  need_positive(p.chi_34, "chi_34");
  need_positive(p.chi_35, "chi_35");
  need_positive(p.chi_45, "chi_45");
  need_positive(p.kappa_0, "kappa_0");
  need_positive(p.temperature, "temperature");
  if (!(p.n_pen >= 2.0))
    bad.push_back("n_pen: must be >= 2 (two-spin correlation requires it)");
  if (!(p.n_th >= 0.0)) bad.push_back("n_th: must be >= 0");
  if (std::isfinite(kappa_low) && !(p.kappa_0 < kappa_low))
    bad.push_back(
        "kappa_0: must be below kappa_low, otherwise the output power is "
        "non-positive during the low phase");
  if (!bad.empty()) {
    std::string msg = "invalid parameters:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

}  // namespace qbmaser
