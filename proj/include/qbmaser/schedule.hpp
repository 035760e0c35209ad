#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qbmaser/constants.hpp"
#include "qbmaser/state.hpp"

namespace qbmaser {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scheme { instantaneous, linear, sinusoidal };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::instantaneous: return "instantaneous";
    case Scheme::linear: return "linear";
    case Scheme::sinusoidal: return "sinusoidal";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "instantaneous") return Scheme::instantaneous;
  if (s == "linear") return Scheme::linear;
  if (s == "sinusoidal") return Scheme::sinusoidal;
  throw ProtocolError("unknown scheme '" + s + "'");
}

struct Termination {
  enum class Mode { threshold, fixed };
  Mode mode = Mode::threshold;
  double threshold_photons = 1e10; // threshold mode: photon count ending the low phase
  double tau_2 = 0.0;              // fixed mode: total modulation window, s
};

// Resolved schedule: all durations in seconds, all kappas angular (rad/s).
// tau_down/tau_up are zero for the instantaneous scheme.
struct ScheduleConfig {
  Scheme scheme = Scheme::instantaneous;
  double kappa_high = 0.0;
  double kappa_low = 0.0;
  double tau_1 = 1e-8;
  double tau_down = 0.0;
  double tau_up = 0.0;
  Termination termination;
  int n_cycles = 20;
  double t_charge = std::nan(""); // NaN = resolve automatically before the run
  double tau_low_max = 1e-5;      // safety cap when the threshold is never hit
  double seed_photons = 0.0;
};

inline void validate_schedule(const ScheduleConfig& c) {
  std::string bad;
  auto complain = [&bad](const std::string& s) { bad += "\n  " + s; };
  if (!(c.kappa_high > c.kappa_low))
    complain("kappa_high: must exceed kappa_low");
  if (!(c.kappa_low > 0.0)) complain("kappa_low: must be > 0");
  if (!(c.tau_1 > 0.0)) complain("tau_1: must be > 0");
  if (c.scheme == Scheme::instantaneous) {
    if (c.tau_down != 0.0 || c.tau_up != 0.0)
      complain("tau_down/tau_up: must be 0 for the instantaneous scheme");
  } else {
    if (!(c.tau_down > 0.0)) complain("tau_down: must be > 0");
    if (!(c.tau_up > 0.0)) complain("tau_up: must be > 0");
  }
  if (c.termination.mode == Termination::Mode::threshold) {
    if (!(c.termination.threshold_photons > 0.0))
      complain("termination.threshold: must be > 0");
  } else {
    if (!(c.termination.tau_2 > 0.0)) complain("termination.fixed: must be > 0");
  }
  if (c.n_cycles < 0) complain("n_cycles: must be >= 0");
  if (!(c.tau_low_max > 0.0)) complain("tau_low_max: must be > 0");
  if (!(c.seed_photons >= 0.0)) complain("seed_photons: must be >= 0");
  if (!std::isnan(c.t_charge) && !(c.t_charge >= 0.0))
    complain("t_charge: must be >= 0 or auto");
  if (!bad.empty()) throw ProtocolError("invalid schedule:" + bad);
}

enum class Phase { charging, delay, descending, low, ascending };

inline const char* to_string(Phase ph) {
  switch (ph) {
    case Phase::charging: return "charging";
    case Phase::delay: return "delay";
    case Phase::descending: return "descending";
    case Phase::low: return "low";
    case Phase::ascending: return "ascending";
  }
  return "?";
}

// Protocol position. `descent_elapsed` is the elapsed-descent coordinate
// recorded when the descending phase ended (tau_down if it completed, less if
// a threshold crossing or a short fixed window interrupted it); the ascent
// retraces the descent curve from that coordinate.
struct PhaseState {
  Phase phase = Phase::charging;
  double phase_start = 0.0;
  int cycle = 0; // 1-based; 0 during charging
  double descent_elapsed = 0.0;
  double kappa_at_interrupt = 0.0;
};

// kappa along the descending transition, as a function of elapsed time
inline double descent_kappa(const ScheduleConfig& c, double elapsed) {
  const double span = c.kappa_high - c.kappa_low;
  const double x = std::clamp(elapsed / c.tau_down, 0.0, 1.0);
  switch (c.scheme) {
    case Scheme::linear:
      return c.kappa_high - span * x;
    case Scheme::sinusoidal: {
      const double s = std::sin(0.5 * pi * x);
      return c.kappa_high - span * (s * s);
    }
    case Scheme::instantaneous:
      break;
  }
  throw ProtocolError("descent_kappa: instantaneous scheme has no transition phase");
}

// duration of the ascending phase implied by the recorded descent coordinate
inline double ascent_duration(const PhaseState& ps, const ScheduleConfig& c) {
  if (c.scheme == Scheme::instantaneous || c.tau_down <= 0.0) return 0.0;
  return ps.descent_elapsed * (c.tau_up / c.tau_down);
}

inline double kappa_at(const PhaseState& ps, double t, const ScheduleConfig& c) {
  const double dt = t - ps.phase_start;
  switch (ps.phase) {
    case Phase::charging:
    case Phase::delay:
      return c.kappa_high;
    case Phase::low:
      return c.kappa_low;
    case Phase::descending:
      return descent_kappa(c, dt);
    case Phase::ascending: {
      const double dur = ascent_duration(ps, c);
      if (dur <= 0.0) return c.kappa_high;
      const double s = std::clamp(dt, 0.0, dur);
      return descent_kappa(c, ps.descent_elapsed * (1.0 - s / dur));
    }
  }
  throw ProtocolError("kappa_at: bad phase");
}

struct PhaseEvent {
  enum class Kind { phase_elapsed, threshold_crossed };
  Kind kind = Kind::phase_elapsed;
  double t = 0.0;     // absolute event time
  double kappa = 0.0; // kappa at the event (threshold crossings)
};

// State-machine step. Threshold crossings are legal only while descending or
// in the low phase; crossing during the descent skips the low phase and the
// ascent starts from the recorded interrupt point.
inline PhaseState advance(const PhaseState& ps, const PhaseEvent& ev,
                          const ScheduleConfig& c) {
  const bool threshold = ev.kind == PhaseEvent::Kind::threshold_crossed;
  PhaseState next = ps;
  next.phase_start = ev.t;
  switch (ps.phase) {
    case Phase::charging:
      if (threshold)
        throw ProtocolError("threshold event during charging (armed only in tau_2)");
      next.phase = Phase::delay;
      next.cycle = 1;
      return next;
    case Phase::delay:
      if (threshold)
        throw ProtocolError("threshold event during delay (armed only in tau_2)");
      next.phase = (c.scheme == Scheme::instantaneous) ? Phase::low
                                                       : Phase::descending;
      next.descent_elapsed = 0.0;
      next.kappa_at_interrupt = 0.0;
      return next;
    case Phase::descending:
      next.descent_elapsed = ev.t - ps.phase_start;
      if (threshold) {
        next.phase = Phase::ascending;
        next.kappa_at_interrupt = ev.kappa;
      } else {
        next.phase = Phase::low;
      }
      return next;
    case Phase::low:
      if (c.scheme == Scheme::instantaneous) {
        next.phase = Phase::delay;
        next.cycle = ps.cycle + 1;
      } else {
        next.phase = Phase::ascending;
        if (!threshold) next.kappa_at_interrupt = c.kappa_low;
        else next.kappa_at_interrupt = ev.kappa;
      }
      return next;
    case Phase::ascending:
      if (threshold)
        throw ProtocolError("threshold event during ascending (disarmed after the low phase)");
      next.phase = Phase::delay;
      next.cycle = ps.cycle + 1;
      return next;
  }
  throw ProtocolError("advance: bad phase");
}

// event function for threshold-mode root localization; a sign change brackets
// the crossing
inline double threshold_gap(const StateVec& y, const ScheduleConfig& c) {
  return y[iNph] - c.termination.threshold_photons;
}

}  // namespace qbmaser
