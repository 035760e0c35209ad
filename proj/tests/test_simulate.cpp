#include <doctest.h>

#include <cmath>

#include "test_util.hpp"

using namespace qbmaser;
using test_util::default_schedule;
using test_util::pentacene_defaults;
using test_util::rel_diff;

TEST_SUITE("simulate") {

TEST_CASE("charging-only run ends at the stored-energy peak") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 0;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);

  REQUIRE(!traj.samples.empty());
  CHECK(traj.t_charge_resolved > 0.0);
  CHECK(traj.samples.back().t == doctest::Approx(traj.t_charge_resolved));
  // p5 at the end sits at its transient maximum: the derivative changes sign
  const StateVec& yend = traj.samples.back().y;
  const double dp5 = rhs(yend, c.kappa_high, p)[iP5];
  CHECK(std::abs(dp5) < 1e-2); // 1/s scale, vanishing at the peak
  // and the battery is substantially charged
  CHECK(yend[iP5] > 0.5);
}

TEST_CASE("population trace stays near one along a full run") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 3;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  double worst = 0.0;
  for (const Sample& s : traj.samples)
    worst = std::max(worst, std::abs(population_trace(s.y) - 1.0));
  CHECK(worst < 1e-9);
}

TEST_CASE("instantaneous threshold run produces a pulse train at the threshold") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule(Scheme::instantaneous);
  c.n_cycles = 5;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);

  const auto windows = segment_cycles(traj);
  REQUIRE(windows.size() == 5);
  for (const auto& w : windows) {
    double n_max = 0.0;
    for (std::size_t i = w.begin; i < w.end; ++i)
      n_max = std::max(n_max, traj.samples[i].y[iNph]);
    CHECK(n_max > 0.5e10);
    CHECK(n_max < 2e10);
    CHECK(w.tau_low_realized > 0.0);
  }
}

TEST_CASE("phase log follows the protocol order") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule(Scheme::linear);
  c.n_cycles = 2;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);

  REQUIRE(traj.phase_log.size() >= 4);
  CHECK(traj.phase_log.front().phase == Phase::charging);
  double prev_t = -1.0;
  for (const auto& e : traj.phase_log) {
    CHECK(e.t >= prev_t);
    prev_t = e.t;
  }
  // each cycle enters tau_2 via the descending phase in the linear scheme
  int descents = 0;
  for (const auto& e : traj.phase_log)
    if (e.phase == Phase::descending) ++descents;
  CHECK(descents == 2);
  // strictly increasing sample times
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    CHECK(traj.samples[i].t > traj.samples[i - 1].t);
}

TEST_CASE("identical inputs give bit-identical trajectories") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule(Scheme::sinusoidal);
  c.n_cycles = 2;
  SolverConfig sc;
  const Trajectory a = run_simulation(p, c, sc);
  const Trajectory b = run_simulation(p, c, sc);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].t == b.samples[i].t);
    for (int j = 0; j < kStateDim; ++j)
      CHECK(a.samples[i].y[j] == b.samples[i].y[j]);
  }
}

TEST_CASE("fixed-mode modulation window adds up to tau_2 exactly") {
  const PhysicalParameters p = pentacene_defaults();
  for (Scheme scheme : {Scheme::instantaneous, Scheme::linear}) {
    ScheduleConfig c = default_schedule(scheme);
    c.termination.mode = Termination::Mode::fixed;
    c.termination.tau_2 = 5e-7;
    c.n_cycles = 1;
    SolverConfig sc;
    const Trajectory traj = run_simulation(p, c, sc);
    // tau_2 spans from the first descending/low entry to the next delay
    double t_start = std::nan(""), t_end = std::nan("");
    for (const auto& e : traj.phase_log) {
      if (e.cycle == 1 && std::isnan(t_start) &&
          (e.phase == Phase::descending || e.phase == Phase::low))
        t_start = e.t;
      if (e.cycle == 2 && e.phase == Phase::delay) t_end = e.t;
    }
    REQUIRE(!std::isnan(t_start));
    REQUIRE(!std::isnan(t_end));
    CHECK(std::abs((t_end - t_start) - c.termination.tau_2) <
          8.0 * std::numeric_limits<double>::epsilon() * t_end);
  }
}

TEST_CASE("short fixed window truncates the descent at the midpoint") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule(Scheme::linear);
  c.termination.mode = Termination::Mode::fixed;
  c.termination.tau_2 = c.tau_down; // shorter than tau_down + tau_up
  c.n_cycles = 1;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);

  double t_desc = std::nan(""), t_asc = std::nan(""), t_next = std::nan("");
  double kappa_asc = std::nan("");
  for (const auto& e : traj.phase_log) {
    if (e.cycle == 1 && e.phase == Phase::descending) t_desc = e.t;
    if (e.cycle == 1 && e.phase == Phase::ascending) {
      t_asc = e.t;
      kappa_asc = e.kappa;
    }
    if (e.cycle == 2 && e.phase == Phase::delay) t_next = e.t;
  }
  REQUIRE(!std::isnan(t_desc));
  REQUIRE(!std::isnan(t_asc));
  CHECK(t_asc - t_desc == doctest::Approx(0.5 * c.termination.tau_2).epsilon(1e-12));
  CHECK(t_next - t_desc == doctest::Approx(c.termination.tau_2).epsilon(1e-12));
  // the turn-around kappa sits mid-descent, above kappa_low
  CHECK(kappa_asc > c.kappa_low);
  CHECK(kappa_asc < c.kappa_high);
  CHECK(kappa_asc ==
        doctest::Approx(0.5 * (c.kappa_high + c.kappa_low)).epsilon(1e-6));
}

TEST_CASE("instantaneous power matches a finite difference of the energy") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 0;
  SolverConfig sc;
  sc.sample_dt_coarse = 1e-10; // keeps the difference quotient's truncation small
  const Trajectory traj = run_simulation(p, c, sc);
  REQUIRE(traj.samples.size() > 50);
  double p_scale = 0.0;
  for (const Sample& s : traj.samples)
    p_scale = std::max(p_scale, std::abs(instantaneous_power(s.y, s.kappa, p)));
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < traj.samples.size(); ++i) {
    const Sample& a = traj.samples[i - 1];
    const Sample& b = traj.samples[i];
    const Sample& d = traj.samples[i + 1];
    if (d.t - a.t <= 0.0) continue;
    const double fd =
        (battery_energy(d.y, p) - battery_energy(a.y, p)) / (d.t - a.t);
    worst = std::max(
        worst, std::abs(fd - instantaneous_power(b.y, b.kappa, p)) / p_scale);
  }
  CHECK(worst < 1e-3); // second-order finite-difference truncation
}

TEST_CASE("a threshold that is never reached hits the low-phase cap") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.termination.threshold_photons = 1e30; // unreachable
  c.tau_low_max = 2e-7;
  c.n_cycles = 1;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  REQUIRE(traj.capped_cycles.size() == 1);
  CHECK(traj.capped_cycles[0] == 1);
  REQUIRE(!traj.warnings.empty());
  const auto rows = pulse_metrics(traj, p);
  REQUIRE(rows.size() == 1);
  CHECK(std::find(rows[0].flags.begin(), rows[0].flags.end(),
                  "tau_low_capped") != rows[0].flags.end());
  CHECK(rows[0].tau_low_realized == doctest::Approx(2e-7).epsilon(1e-9));
}

TEST_CASE("charging-only trajectories have no cycle windows") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 0;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  CHECK(segment_cycles(traj).empty());
  CHECK(pulse_metrics(traj, p).empty());
}

TEST_CASE("a configured seed field enters the initial state") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 0;
  c.seed_photons = 1e6;
  c.t_charge = 1e-9;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  CHECK(traj.samples.front().y[iNph] == 1e6);
}

TEST_CASE("zero-length phases never duplicate sample times") {
  const PhysicalParameters p = pentacene_defaults();

  SUBCASE("explicit zero charging time") {
    ScheduleConfig c = default_schedule();
    c.t_charge = 0.0;
    c.n_cycles = 1;
    SolverConfig sc;
    const Trajectory traj = run_simulation(p, c, sc);
    for (std::size_t i = 1; i < traj.samples.size(); ++i)
      CHECK(traj.samples[i].t > traj.samples[i - 1].t);
  }
  SUBCASE("fixed window exactly equal to the transition time") {
    ScheduleConfig c = default_schedule(Scheme::linear);
    c.termination.mode = Termination::Mode::fixed;
    c.termination.tau_2 = c.tau_down + c.tau_up; // zero-length low phase
    c.n_cycles = 1;
    SolverConfig sc;
    const Trajectory traj = run_simulation(p, c, sc);
    for (std::size_t i = 1; i < traj.samples.size(); ++i)
      CHECK(traj.samples[i].t > traj.samples[i - 1].t);
    const auto rows = pulse_metrics(traj, p);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].tau_low_realized == 0.0);
  }
}

TEST_CASE("photon number never dips below the absolute tolerance") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 3;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  for (const Sample& s : traj.samples) CHECK(s.y[iNph] >= -sc.abs_tol_n_ph);
}

TEST_CASE("halving the tolerances moves the first-pulse peak by well under 0.1%") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 1;
  SolverConfig sc;
  const double t_charge = resolve_t_charge(p, c, sc);
  c.t_charge = t_charge;

  auto peak_n = [&](const SolverConfig& s) {
    const Trajectory traj = run_simulation(p, c, s);
    double best = 0.0;
    for (const Sample& smp : traj.samples) best = std::max(best, smp.y[iNph]);
    return best;
  };
  const double n1 = peak_n(sc);
  SolverConfig tight = sc;
  tight.rel_tol *= 0.5;
  tight.abs_tol *= 0.5;
  tight.abs_tol_n_ph *= 0.5;
  const double n2 = peak_n(tight);
  CHECK(rel_diff(n1, n2) < 1e-3);
}

TEST_CASE("photon number at a located threshold event equals the threshold") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule();
  c.n_cycles = 4;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  // the boundary sample entering each post-threshold delay carries the state
  // at the localized crossing
  int checked = 0;
  for (const auto& e : traj.phase_log) {
    if (e.phase != Phase::delay || e.cycle < 2) continue;
    auto it = std::lower_bound(
        traj.samples.begin(), traj.samples.end(), e.t,
        [](const Sample& s, double t) { return s.t < t; });
    REQUIRE(it != traj.samples.end());
    CHECK(std::abs(it->y[iNph] - c.termination.threshold_photons) /
              c.termination.threshold_photons <
          1e-6);
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("kappa is continuous within the slope bound for smooth schemes") {
  const PhysicalParameters p = pentacene_defaults();
  ScheduleConfig c = default_schedule(Scheme::linear);
  c.n_cycles = 2;
  SolverConfig sc;
  const Trajectory traj = run_simulation(p, c, sc);
  const double slope = (c.kappa_high - c.kappa_low) / c.tau_down;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const double dt = traj.samples[i].t - traj.samples[i - 1].t;
    const double dk = std::abs(traj.samples[i].kappa - traj.samples[i - 1].kappa);
    CHECK(dk <= slope * dt * 1.0001 + 1e-3);
  }
}

TEST_CASE("adaptive and fixed-step paths agree on a decay segment") {
  PhysicalParameters p = pentacene_defaults();
  p.g_35 = 0.0;
  p.pump_power = 0.0;
  ScheduleConfig c = default_schedule();
  c.n_cycles = 1;
  c.t_charge = 1e-8;
  c.seed_photons = 1e8;
  c.termination.mode = Termination::Mode::fixed;
  c.termination.tau_2 = 1e-7;
  SolverConfig sc;
  const Trajectory a = run_simulation(p, c, sc);
  const Trajectory r = rk4_reference(p, c, sc, 1e-12);
  REQUIRE(a.samples.size() == r.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    REQUIRE(a.samples[i].t == doctest::Approx(r.samples[i].t).epsilon(1e-14));
    const double na = a.samples[i].y[iNph];
    const double nr = r.samples[i].y[iNph];
    worst = std::max(worst, std::abs(na - nr) / std::max(nr, 1.0));
  }
  CHECK(worst < 1e-8);
}

}  // TEST_SUITE
