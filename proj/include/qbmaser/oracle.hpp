#pragma once

#include <algorithm>
#include <cmath>

#include "qbmaser/simulate.hpp"

namespace qbmaser {

struct OracleComparison {
  double max_rel_dev = std::nan("");
  double t_at_max = std::nan("");
  std::size_t compared = 0;
  double n_peak_reference = 0.0;
};

// Cross-validates the adaptive integrator against the fixed-step reference
// over the first pulse: both runs share the resolved charging time, one
// cycle, and the same sample grids; n_ph is compared at coincident sample
// times. Deviations are measured relative to max(n_ref, 1e-9 * peak) so the
// vacuum-level seed does not dominate.
inline OracleComparison compare_first_pulse(const PhysicalParameters& p,
                                            ScheduleConfig c,
                                            const SolverConfig& sc,
                                            double rk4_dt) {
  c.n_cycles = std::min(c.n_cycles, 1);
  if (c.n_cycles < 1) c.n_cycles = 1;
  if (std::isnan(c.t_charge)) c.t_charge = resolve_t_charge(p, c, sc);

  const Trajectory adaptive = run_simulation(p, c, sc);
  const Trajectory reference = rk4_reference(p, c, sc, rk4_dt);

  OracleComparison out;
  for (const Sample& s : reference.samples)
    out.n_peak_reference = std::max(out.n_peak_reference, s.y[iNph]);
  const double floor = 1e-9 * std::max(out.n_peak_reference, 1.0);

  std::size_t ia = 0, ir = 0;
  double max_dev = 0.0, t_at = 0.0;
  std::size_t compared = 0;
  while (ia < adaptive.samples.size() && ir < reference.samples.size()) {
    const double ta = adaptive.samples[ia].t;
    const double tr = reference.samples[ir].t;
    const double tol = 1e-12 * std::max(1.0, std::max(std::abs(ta), std::abs(tr)));
    if (std::abs(ta - tr) <= tol) {
      const double na = adaptive.samples[ia].y[iNph];
      const double nr = reference.samples[ir].y[iNph];
      const double dev = std::abs(na - nr) / std::max(std::abs(nr), floor);
      if (dev > max_dev) {
        max_dev = dev;
        t_at = ta;
      }
      ++compared;
      ++ia;
      ++ir;
    } else if (ta < tr) {
      ++ia;
    } else {
      ++ir;
    }
  }
  out.max_rel_dev = max_dev;
  out.t_at_max = t_at;
  out.compared = compared;
  return out;
}

}  // namespace qbmaser
