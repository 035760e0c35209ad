// Calibrates the internal cavity loss kappa_0 from the requirement that the
// peak output of an unmodulated release equals a target wattage: charge the
// battery, drop kappa to kappa_low and hold it there well past the emission
// spike, take the peak photon number n_pk of that spike, and solve
//   P_target = n_pk hbar w_m (kappa_low - kappa_0)
// for kappa_0. The intracavity dynamics never depend on kappa_0, so one run
// determines the calibration. Optionally also reports the long-horizon
// continuous-drive output level for reference.

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <string>

#include "qbmaser/qbmaser.hpp"

using namespace qbmaser;

int main(int argc, char** argv) {
  CLI::App app{"kappa_0 calibration from the unmodulated release peak"};
  std::string config_path;
  std::string out_path;
  double target_w = 1.44;
  double hold_s = 2e-6;
  double cw_horizon_s = 0.0;
  app.add_option("--config", config_path, "run configuration JSON")->required();
  app.add_option("--target", target_w, "target peak output power, W");
  app.add_option("--hold", hold_s, "kappa_low hold duration, s");
  app.add_option("--cw-horizon", cw_horizon_s,
                 "also run an uncharged continuous kappa_low drive for this "
                 "horizon and report its late-time output level");
  app.add_option("--out", out_path, "write a JSON calibration report here");
  CLI11_PARSE(app, argc, argv);

  RunConfig rc;
  try {
    rc = load_run_config(read_json_file(config_path));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  ScheduleConfig c = rc.schedule;
  c.scheme = Scheme::instantaneous;
  c.tau_down = 0.0;
  c.tau_up = 0.0;
  c.termination.mode = Termination::Mode::fixed;
  c.termination.tau_2 = hold_s;
  c.n_cycles = 1;

  SolverConfig sc = rc.solver;
  sc.sample_dt_tau2 = 1e-10;

  const Trajectory traj = run_simulation(rc.params, c, sc);

  // peak photon number inside the kappa_low hold
  double n_pk = 0.0, t_pk = 0.0;
  for (const Sample& s : traj.samples) {
    if (s.kappa > 1.5 * c.kappa_low) continue;
    if (s.y[iNph] > n_pk) {
      n_pk = s.y[iNph];
      t_pk = s.t;
    }
  }
  const double denom = n_pk * hbar * rc.params.omega_m;
  const double kappa_0 = c.kappa_low - target_w / denom;
  const double max_peak_w = denom * c.kappa_low; // kappa_0 -> 0 limit
  const bool feasible = kappa_0 > 0.0;
  const double kappa_0_floor = 1e-3 * c.kappa_low;
  const double kappa_0_chosen = feasible ? kappa_0 : kappa_0_floor;

  json report = {
      {"target_w", target_w},
      {"hold_s", hold_s},
      {"t_charge_s", traj.t_charge_resolved},
      {"n_ph_peak", n_pk},
      {"t_peak_s", t_pk},
      {"max_attainable_peak_w", max_peak_w},
      {"feasible", feasible},
      {"kappa_0_rad_s", kappa_0_chosen},
      {"kappa_0_over_2pi_hz", kappa_0_chosen / two_pi},
      {"peak_w_at_chosen_kappa_0",
       n_pk * hbar * rc.params.omega_m * (c.kappa_low - kappa_0_chosen)}};

  if (cw_horizon_s > 0.0) {
    // continuous kappa_low drive from the uncharged state: late-time output
    PhysicalParameters p = rc.params;
    SolverConfig sc2 = rc.solver;
    Dopri5 be(sc2);
    StateVec y = ground_state();
    double inserted = 0.0, span = 0.0;
    const double tail_from = 0.8 * cw_horizon_s;
    double acc = 0.0, acc_t = 0.0, last_t = 0.0, last_v = 0.0;
    be.integrate_segment(
        y, 0.0, cw_horizon_s, [&](double) { return c.kappa_low; }, p,
        cw_horizon_s / 20000.0,
        [&](double t, const StateVec& s) {
          if (t < tail_from) return;
          const double v = s[iNph] * hbar * p.omega_m * c.kappa_low;
          if (acc_t > 0.0) acc += 0.5 * (v + last_v) * (t - last_t);
          last_t = t;
          last_v = v;
          acc_t = t;
          span = t - tail_from;
        },
        std::max({c.kappa_low, p.pump_rate(), p.k_sp, p.k_25}));
    inserted = span > 0.0 ? acc / span : 0.0;
    report["cw_late_total_dissipated_w"] = inserted;
    report["cw_horizon_s"] = cw_horizon_s;
  }

  std::cout << report.dump(2) << "\n";
  if (!feasible)
    std::cerr << "warning: target unreachable for any kappa_0 in (0, "
                 "kappa_low); falling back to kappa_low/1000\n";
  if (!out_path.empty()) write_text_atomic(out_path, report.dump(2) + "\n");
  return feasible ? 0 : 2;
}
