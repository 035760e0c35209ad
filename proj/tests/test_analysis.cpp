#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"

using namespace qbmaser;
using test_util::default_schedule;
using test_util::pentacene_defaults;
using test_util::rel_diff;

TEST_SUITE("analysis") {

TEST_CASE("fwhm of a symmetric triangle") {
  std::vector<double> t, y;
  for (int i = 0; i <= 200; ++i) {
    const double x = 2.0 * i / 200.0;
    t.push_back(x);
    y.push_back(x <= 1.0 ? x : 2.0 - x);
  }
  const FwhmResult r = fwhm(t, y, 1e-13);
  REQUIRE(r.resolved);
  CHECK(r.width == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.t_peak == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fwhm of a sampled Gaussian against the closed form") {
  const double sigma = 3.7e-9;
  const double t0 = 5e-8;
  std::vector<double> t, y;
  for (int i = 0; i <= 1000; ++i) {
    const double x = 1e-7 * i / 1000.0;
    t.push_back(x);
    y.push_back(std::exp(-0.5 * std::pow((x - t0) / sigma, 2)));
  }
  const FwhmResult r = fwhm(t, y, 1e-13);
  REQUIRE(r.resolved);
  const double expected = 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma;
  CHECK(rel_diff(r.width, expected) < 1e-3);
}

TEST_CASE("fwhm is invariant under uniform scaling") {
  std::vector<double> t, y;
  for (int i = 0; i <= 500; ++i) {
    const double x = i / 500.0;
    t.push_back(x);
    y.push_back(std::exp(-50.0 * (x - 0.43) * (x - 0.43)));
  }
  const FwhmResult a = fwhm(t, y, 1e-13);
  for (double& v : y) v *= 7.3e11;
  const FwhmResult b = fwhm(t, y, 1e-13);
  REQUIRE(a.resolved);
  REQUIRE(b.resolved);
  CHECK(a.width == doctest::Approx(b.width).epsilon(1e-12));
}

TEST_CASE("truncated pulse yields an unresolved marker") {
  // never falls below half maximum on the right side
  std::vector<double> t, y;
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 100.0;
    t.push_back(x);
    y.push_back(x < 0.5 ? x : 0.8 - 0.2 * x);
  }
  const FwhmResult r = fwhm(t, y, 1e-13);
  CHECK_FALSE(r.resolved);
  CHECK(std::isnan(r.width));
}

TEST_CASE("peak at the window edge is not a valid pulse") {
  std::vector<double> t = {0.0, 1.0, 2.0};
  std::vector<double> y = {3.0, 2.0, 1.0};
  CHECK_FALSE(fwhm(t, y, 1e-13).resolved);
}

TEST_CASE("cycle windows partition the modulated timeline") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 4;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  const auto windows = segment_cycles(traj);
  REQUIRE(windows.size() == 4);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    CHECK(windows[k].cycle == static_cast<int>(k) + 1);
    if (k + 1 < windows.size()) {
      CHECK(windows[k].end == windows[k + 1].begin); // no gaps, no overlaps
      CHECK(traj.samples[windows[k + 1].begin].t ==
            doctest::Approx(windows[k + 1].t_tau2_start));
    }
  }
  CHECK(windows.back().end == traj.samples.size());
  CHECK(segment_cycles(traj).size() == 4); // deterministic
}

TEST_CASE("single-cycle run gives exactly one record") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.termination.mode = Termination::Mode::fixed;
  c.termination.tau_2 = 3e-7;
  c.n_cycles = 1;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  const auto rows = pulse_metrics(traj, p);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].cycle == 1);
}

TEST_CASE("empty phase log is an error") {
  Trajectory traj;
  CHECK_THROWS_AS(segment_cycles(traj), AnalysisError);
}

TEST_CASE("lossless exchange converts battery quanta one-to-one") {
  // kappa = 0, pump off, relaxation/dephasing switched off: only the 3<->5
  // exchange is active, so every photon gained is one p5 quantum lost and
  // eta_work is exactly one
  PhysicalParameters p = pentacene_defaults();
  p.pump_power = 0.0;
  p.k_sp = p.k_23 = p.k_24 = p.k_25 = 0.0;
  p.k_31 = p.k_41 = p.k_51 = 0.0;
  p.k_34 = p.k_43 = p.k_35 = p.k_53 = p.k_45 = p.k_54 = 0.0;
  p.chi_34 = p.chi_35 = p.chi_45 = 0.0;

  SolverConfig sc;
  sc.sample_dt_tau2 = 1e-10;
  Dopri5 be(sc);
  StateVec y{};
  y[iP5] = 1.0;

  Trajectory traj;
  traj.phase_log.push_back({0.0, Phase::low, 1, 0.0});
  traj.samples.push_back({0.0, y, 0.0});
  const double horizon = 4e-7; // covers the full collective burst
  be.integrate_segment(
      y, 0.0, horizon, [](double) { return 0.0; }, p, 2e-10,
      [&](double t, const StateVec& s) { traj.samples.push_back({t, s, 0.0}); },
      1e8);
  traj.samples.push_back({horizon, y, 0.0});

  // the burst transfers a macroscopic photon number
  double n_max = 0.0;
  for (const Sample& s : traj.samples) n_max = std::max(n_max, s.y[iNph]);
  REQUIRE(n_max > 1e15);

  CycleWindow w;
  w.cycle = 1;
  w.begin = 0;
  w.end = traj.samples.size();
  w.t_tau2_start = 0.0;
  const EtaWorkResult ew = work_extraction_efficiency(traj, w, p);
  CHECK_FALSE(ew.flagged);
  CHECK(std::abs(ew.value - 1.0) < 1e-6);
}

TEST_CASE("power compression is one when output equals instantaneous power") {
  // synthetic check on the ratio itself: build a window whose argmax sample
  // has P_out == |P_ins| by construction
  PhysicalParameters p = pentacene_defaults();
  p.g_35 = 0.0;
  p.pump_power = 0.0;
  // with only depopulation active, P_ins = -N hbar w35 (k51+k53+k54) p5;
  // choose n_ph so P_out matches |P_ins| at kappa = kappa_0 + delta
  const double kappa = p.kappa_0 * 3.0;
  StateVec y{};
  y[iP5] = 0.5;
  const double p_ins = std::abs(instantaneous_power(y, kappa, p));
  const double n_ph = p_ins / (hbar * p.omega_m * (kappa - p.kappa_0));
  y[iNph] = n_ph;

  Trajectory traj;
  traj.phase_log.push_back({0.0, Phase::low, 1, kappa});
  // surround the peak with smaller samples
  StateVec lo = y;
  lo[iNph] = 0.1 * n_ph;
  traj.samples.push_back({0.0, lo, kappa});
  traj.samples.push_back({1e-9, y, kappa});
  traj.samples.push_back({2e-9, lo, kappa});

  CycleWindow w;
  w.cycle = 1;
  w.begin = 0;
  w.end = 3;
  const EtaPowerResult ep = power_compression(traj, w, p);
  CHECK_FALSE(ep.undefined);
  CHECK(ep.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ep.n_ph == doctest::Approx(n_ph).epsilon(1e-12));
  CHECK(ep.kappa == kappa);
}

TEST_CASE("per-cycle metrics of a threshold run") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 4;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  const auto rows = pulse_metrics(traj, p);
  REQUIRE(rows.size() == 4);
  for (const auto& m : rows) {
    // photon maxima hover at the preset threshold
    CHECK(m.n_ph_max > 0.5e10);
    CHECK(m.n_ph_max < 2e10);
    CHECK(m.tau_low_realized >= 0.0);
    CHECK(std::isfinite(m.p_out_max));
    CHECK(m.p_out_max > 0.0);
    // the reset flush dominates the output peak in the instantaneous scheme
    CHECK(m.kappa_at_pout_max == doctest::Approx(c.kappa_high));
    // and its width sits far below the intracavity burst width
    if (std::isfinite(m.fwhm_pout) && std::isfinite(m.fwhm_nph))
      CHECK(m.fwhm_pout < m.fwhm_nph);
  }
  // identical trajectories yield identical metric tables
  const auto rows2 = pulse_metrics(traj, p);
  REQUIRE(rows2.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].n_ph_max == rows2[i].n_ph_max);
    CHECK(rows[i].eta_work == rows2[i].eta_work);
  }
}

}  // TEST_SUITE
