#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qbmaser/model.hpp"
#include "qbmaser/schedule.hpp"
#include "qbmaser/solver.hpp"

namespace qbmaser {

struct Sample {
  double t = 0.0;
  StateVec y{};
  double kappa = 0.0;
};

struct PhaseLogEntry {
  double t = 0.0;
  Phase phase = Phase::charging;
  int cycle = 0;
  double kappa = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<PhaseLogEntry> phase_log;
  double t_charge_resolved = 0.0;
  std::vector<std::string> warnings;
  std::vector<int> capped_cycles; // cycles whose low phase hit tau_low_max
};

namespace detail {

// fastest rate relevant to explicit stability on a segment
inline double rate_guard_for(const PhysicalParameters& p, double kappa_max) {
  return std::max({kappa_max, p.pump_rate(), p.k_sp, p.k_25});
}

// maximum kappa over the upcoming phase segment; the ascent ends at the
// kappa the descent started from, bounded by kappa_high
inline double segment_kappa_max(const PhaseState& ps, const ScheduleConfig& c) {
  switch (ps.phase) {
    case Phase::charging:
    case Phase::delay:
    case Phase::descending:
    case Phase::ascending:
      return c.kappa_high;
    case Phase::low:
      return c.kappa_low;
  }
  return c.kappa_high;
}

}  // namespace detail

// Time at which the battery is considered fully charged under constant
// kappa_high pumping: the first maximum of p5 (the stored energy peaks there
// and then self-discharges toward the pump steady state). Localized by an
// up-crossing of -dp5/dt.
template <class Backend>
double resolve_t_charge_with(Backend& be, const PhysicalParameters& p,
                             const ScheduleConfig& c, double horizon = 1e-3) {
  StateVec y = ground_state(c.seed_photons);
  const KappaFn kfn = [&c](double) { return c.kappa_high; };
  const EventFn peak = [&p, &c](const StateVec& s) {
    return -rhs(s, c.kappa_high, p)[iP5];
  };
  const SampleFn no_sink = [](double, const StateVec&) {};
  const double guard = detail::rate_guard_for(p, c.kappa_high);
  auto out = be.integrate_segment(y, 0.0, horizon, kfn, p, horizon, no_sink,
                                  guard, peak);
  be.reset_step();
  if (!out.event_fired)
    throw IntegrationError(
        "charging never peaked within the automatic-charge horizon", horizon);
  return out.t_end;
}

inline double resolve_t_charge(const PhysicalParameters& p,
                               const ScheduleConfig& c,
                               const SolverConfig& sc) {
  Dopri5 be(sc);
  return resolve_t_charge_with(be, p, c);
}

// Full protocol run: charging, then n_cycles of (delay, tau_2), then a
// trailing delay so the last emission burst after the final kappa reset is
// still recorded. Phase boundaries are hard segment breaks; each boundary is
// sampled once, carrying the kappa of the phase being entered.
template <class Backend>
Trajectory run_simulation_with(Backend& be, const PhysicalParameters& p,
                               ScheduleConfig c, const SolverConfig& sc) {
  validate_schedule(c);
  validate_solver(sc);

  Trajectory traj;
  if (std::isnan(c.t_charge)) c.t_charge = resolve_t_charge_with(be, p, c);
  traj.t_charge_resolved = c.t_charge;

  const bool threshold_mode =
      c.termination.mode == Termination::Mode::threshold;
  const double tau_2 = c.termination.tau_2;

  // fixed-mode phase budget; short windows truncate the descent at the
  // proportional point and mirror back up
  double desc_duration = c.tau_down;
  double low_duration_fixed = 0.0;
  bool truncated_descent = false;
  if (!threshold_mode) {
    if (c.scheme == Scheme::instantaneous) {
      low_duration_fixed = tau_2;
    } else if (tau_2 >= c.tau_down + c.tau_up) {
      low_duration_fixed = std::max(0.0, tau_2 - c.tau_down - c.tau_up);
    } else {
      desc_duration = tau_2 * (c.tau_down / (c.tau_down + c.tau_up));
      low_duration_fixed = 0.0;
      truncated_descent = true;
    }
  }

  double t = 0.0;
  StateVec y = ground_state(c.seed_photons);
  PhaseState ps; // charging

  auto log_phase = [&](double tt) {
    traj.phase_log.push_back({tt, ps.phase, ps.cycle, kappa_at(ps, tt, c)});
  };
  // boundaries of zero-length phases coincide; keep one sample per time,
  // carrying the kappa of the phase finally entered
  auto emit_boundary = [&](double tt) {
    const Sample s{tt, y, kappa_at(ps, tt, c)};
    if (!traj.samples.empty() && traj.samples.back().t == tt)
      traj.samples.back() = s;
    else
      traj.samples.push_back(s);
  };

  log_phase(0.0);
  emit_boundary(0.0);

  if (c.t_charge > 0.0) {
    const KappaFn kfn = [&](double tt) { return kappa_at(ps, tt, c); };
    const SampleFn sink = [&](double ts, const StateVec& ys) {
      traj.samples.push_back({ts, ys, kappa_at(ps, ts, c)});
    };
    be.integrate_segment(y, 0.0, c.t_charge, kfn, p, sc.sample_dt_coarse, sink,
                         detail::rate_guard_for(p, c.kappa_high));
    t = c.t_charge;
  }
  if (c.n_cycles == 0) {
    emit_boundary(t);
    return traj;
  }

  ps = advance(ps, {PhaseEvent::Kind::phase_elapsed, t, 0.0}, c);
  log_phase(t);
  emit_boundary(t);

  while (true) {
    // plan the current phase segment
    double duration = 0.0;
    bool armed = false;
    bool cap_watch = false;
    switch (ps.phase) {
      case Phase::delay:
        duration = c.tau_1;
        break;
      case Phase::descending:
        duration = truncated_descent ? desc_duration : c.tau_down;
        armed = threshold_mode;
        break;
      case Phase::low:
        if (threshold_mode) {
          duration = c.tau_low_max;
          armed = true;
          cap_watch = true;
        } else {
          duration = low_duration_fixed;
        }
        break;
      case Phase::ascending:
        duration = truncated_descent ? (tau_2 - desc_duration)
                                     : ascent_duration(ps, c);
        break;
      case Phase::charging:
        throw ProtocolError("unexpected charging phase inside the cycle loop");
    }

    const double t_end = ps.phase_start + duration;
    SegmentOutcome out{t_end, false};
    if (duration > 0.0) {
      const PhaseState frozen = ps;
      const KappaFn kfn = [&frozen, &c](double tt) {
        return kappa_at(frozen, tt, c);
      };
      const SampleFn sink = [&](double ts, const StateVec& ys) {
        traj.samples.push_back({ts, ys, kappa_at(frozen, ts, c)});
      };
      const EventFn gap =
          armed ? EventFn([&c](const StateVec& s) { return threshold_gap(s, c); })
                : EventFn(nullptr);
      const double guard =
          detail::rate_guard_for(p, detail::segment_kappa_max(ps, c));
      try {
        out = be.integrate_segment(y, t, t_end, kfn, p, sc.sample_dt_tau2, sink,
                                   guard, gap);
      } catch (IntegrationError& err) {
        throw IntegrationError(std::string(err.what()) + " (cycle " +
                                   std::to_string(ps.cycle) + ", phase " +
                                   to_string(ps.phase) + ")",
                               err.t);
      }
    }

    if (out.event_fired) {
      if (out.multiple_crossings)
        traj.warnings.push_back(
            "cycle " + std::to_string(ps.cycle) +
            ": multiple threshold crossings within one step; earliest taken");
      const double kappa_star = kappa_at(ps, out.t_end, c);
      ps = advance(ps, {PhaseEvent::Kind::threshold_crossed, out.t_end, kappa_star}, c);
    } else {
      if (cap_watch && threshold_mode) {
        traj.warnings.push_back("cycle " + std::to_string(ps.cycle) +
                                ": threshold not reached within tau_low_max; "
                                "forcing the kappa reset");
        traj.capped_cycles.push_back(ps.cycle);
      }
      ps = advance(ps, {PhaseEvent::Kind::phase_elapsed, out.t_end, 0.0}, c);
    }
    t = out.t_end;
    log_phase(t);
    emit_boundary(t);

    if (ps.phase == Phase::delay && ps.cycle == c.n_cycles + 1) {
      // trailing delay records the final reset burst
      const PhaseState frozen = ps;
      const KappaFn kfn = [&frozen, &c](double tt) {
        return kappa_at(frozen, tt, c);
      };
      const SampleFn sink = [&](double ts, const StateVec& ys) {
        traj.samples.push_back({ts, ys, kappa_at(frozen, ts, c)});
      };
      be.integrate_segment(y, t, t + c.tau_1, kfn, p, sc.sample_dt_tau2, sink,
                           detail::rate_guard_for(p, c.kappa_high));
      t += c.tau_1;
      emit_boundary(t);
      break;
    }
  }
  return traj;
}

inline Trajectory run_simulation(const PhysicalParameters& p,
                                 const ScheduleConfig& c,
                                 const SolverConfig& sc) {
  Dopri5 be(sc);
  return run_simulation_with(be, p, c, sc);
}

// Fixed-step reference run used only for cross-validation. Refuses a dt too
// coarse for the fastest rate in the problem.
inline Trajectory rk4_reference(const PhysicalParameters& p,
                                const ScheduleConfig& c, const SolverConfig& sc,
                                double dt) {
  const double fastest =
      detail::rate_guard_for(p, std::max(c.kappa_high, c.kappa_low));
  if (dt > 0.1 / fastest)
    throw std::invalid_argument(
        "rk4_reference: dt too large to resolve the fastest rate (need dt <= " +
        std::to_string(0.1 / fastest) + " s)");
  Rk4Fixed be(dt, sc.event_time_tol);
  return run_simulation_with(be, p, c, sc);
}

}  // namespace qbmaser
