#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "qbmaser/model.hpp"
#include "qbmaser/parameters.hpp"
#include "qbmaser/state.hpp"

namespace qbmaser {

struct IntegrationError : std::runtime_error {
  double t = 0.0;
  IntegrationError(const std::string& msg, double t_) : std::runtime_error(msg), t(t_) {}
};

struct SolverConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;       // populations, coherence, correlation
  double abs_tol_n_ph = 1e-10;  // photon-number component
  double max_step = 1e-8;       // s
  double initial_step = 1e-12;  // s
  double sample_dt_tau2 = 5e-11;  // dense-output spacing in modulation phases
  double sample_dt_coarse = 1e-9; // dense-output spacing while charging
  double event_time_tol = 1e-15;  // s
};

inline void validate_solver(const SolverConfig& sc) {
  std::string bad;
  auto complain = [&bad](const std::string& s) { bad += "\n  " + s; };
  if (!(sc.rel_tol > 0.0)) complain("rel_tol: must be > 0");
  if (!(sc.abs_tol > 0.0)) complain("abs_tol: must be > 0");
  if (!(sc.abs_tol_n_ph > 0.0)) complain("abs_tol_n_ph: must be > 0");
  if (!(sc.max_step > 0.0)) complain("max_step: must be > 0");
  if (!(sc.initial_step > 0.0)) complain("initial_step: must be > 0");
  if (!(sc.sample_dt_tau2 > 0.0)) complain("sample_dt_tau2: must be > 0");
  if (!(sc.sample_dt_coarse > 0.0)) complain("sample_dt_coarse: must be > 0");
  if (!(sc.event_time_tol > 0.0)) complain("event_time_tol: must be > 0");
  if (sc.event_time_tol > sc.sample_dt_tau2 || sc.event_time_tol > sc.sample_dt_coarse)
    complain("event_time_tol: must not exceed the sampling intervals");
  if (!bad.empty()) throw ConfigError("invalid solver settings:" + bad);
}

using KappaFn = std::function<double(double)>;
using SampleFn = std::function<void(double, const StateVec&)>;
// event fires when this crosses from below zero to >= 0
using EventFn = std::function<double(const StateVec&)>;

struct SegmentOutcome {
  double t_end = 0.0;
  bool event_fired = false;
  // several sign changes inside one accepted step; the earliest was taken
  bool multiple_crossings = false;
};

namespace detail {

inline constexpr double kMinStep = 1e-16;

inline bool finite_state(const StateVec& y) {
  for (double v : y)
    if (!std::isfinite(v)) return false;
  return true;
}

// integration failure thresholds for unphysical excursions
inline void check_physical(const StateVec& y, double t) {
  for (int i = iP1; i <= iP5; ++i)
    if (y[i] < -1e-6)
      throw IntegrationError(
          "negative population excursion beyond tolerance (p" +
              std::to_string(i + 1) + " = " + std::to_string(y[i]) + ")",
          t);
  if (y[iNph] < -1e-3)
    throw IntegrationError("negative photon-number excursion beyond tolerance", t);
}

// Dormand-Prince 5(4) tableau
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights (4th-order continuous extension)
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

struct DenseStep {
  double t = 0.0, h = 0.0;
  StateVec r1{}, r2{}, r3{}, r4{}, r5{};

  StateVec eval(double ts) const {
    const double th = (ts - t) / h;
    const double th1 = 1.0 - th;
    StateVec y{};
    for (int i = 0; i < kStateDim; ++i)
      y[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
    return y;
  }
};

inline double error_norm(const StateVec& y0, const StateVec& y1,
                         const StateVec& err, const SolverConfig& sc) {
  double sum = 0.0;
  for (int i = 0; i < kStateDim; ++i) {
    const double atol = (i == iNph) ? sc.abs_tol_n_ph : sc.abs_tol;
    const double scale =
        atol + sc.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double e = err[i] / scale;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(kStateDim));
}

// earliest up-crossing of `gap` inside one accepted step; g0 = gap at step
// start (< 0). Returns NaN when there is no crossing; sets `multiple` when
// further sign changes follow the one taken.
inline double locate_in_step(const DenseStep& ds, const EventFn& gap, double g0,
                             double g1, double time_tol, bool& multiple) {
  constexpr int kScan = 8;
  double ta = ds.t, ga = g0;
  double tb = std::nan("");
  int first_j = -1;
  for (int j = 1; j <= kScan; ++j) {
    const double tj = ds.t + ds.h * (static_cast<double>(j) / kScan);
    const double gj = (j == kScan) ? g1 : gap(ds.eval(tj));
    if (ga < 0.0 && gj >= 0.0) {
      tb = tj;
      first_j = j;
      break;
    }
    ta = tj;
    ga = gj;
  }
  if (std::isnan(tb)) return std::nan("");
  multiple = false;
  double gk = 1.0; // sign right after the taken crossing
  for (int j = first_j + 1; j <= kScan; ++j) {
    const double tj = ds.t + ds.h * (static_cast<double>(j) / kScan);
    const double gj = (j == kScan) ? g1 : gap(ds.eval(tj));
    if ((gj >= 0.0) != (gk >= 0.0)) multiple = true;
    gk = gj;
  }
  while (tb - ta > time_tol) {
    const double tm = 0.5 * (ta + tb);
    if (gap(ds.eval(tm)) >= 0.0) tb = tm;
    else ta = tm;
  }
  return tb; // first point at/above the threshold within tolerance
}

}  // namespace detail

// Adaptive Dormand-Prince 5(4) advance of `y` from t0 to t1 with kappa(t)
// smooth on the segment (phase boundaries are segment boundaries). Dense
// samples are emitted at t0 + k*sample_dt strictly inside (t0, t1); segment
// endpoints are the caller's responsibility. `rate_guard` is the fastest rate
// active on the segment; steps are clamped to 2/rate_guard so the stiff kappa
// direction stays inside the explicit stability region. If `gap` is non-null
// the earliest up-crossing is localized to event_time_tol and the advance
// stops there.
class Dopri5 {
 public:
  explicit Dopri5(const SolverConfig& sc) : sc_(sc) {}

  SegmentOutcome integrate_segment(StateVec& y, double t0, double t1,
                                   const KappaFn& kappa_of_t,
                                   const PhysicalParameters& p,
                                   double sample_dt, const SampleFn& emit,
                                   double rate_guard,
                                   const EventFn& gap = nullptr) {
    using namespace detail;
    if (!(t1 > t0)) return {t0, false};
    const double h_cap =
        std::min(sc_.max_step, rate_guard > 0.0 ? 2.0 / rate_guard
                                                : std::numeric_limits<double>::infinity());
    double t = t0;
    double h = std::clamp(h_carry_ > 0.0 ? h_carry_ : sc_.initial_step,
                          kMinStep, h_cap);
    h = std::min(h, t1 - t0);

    double g_prev = 0.0;
    if (gap) {
      g_prev = gap(y);
      if (g_prev > 0.0) return {t0, true}; // already past the threshold
    }

    long sample_k = 1; // next sample index on the t0-anchored grid
    StateVec k1 = rhs(y, kappa_of_t(t), p);
    bool rejected_last = false;

    while (true) {
      if (t1 - t <= 1e-16 * std::max(1.0, std::abs(t1))) break;
      if (t + h >= t1) h = t1 - t; // land exactly on the segment end

      StateVec k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, yt{}, y1{}, errv{};
      for (int i = 0; i < kStateDim; ++i) yt[i] = y[i] + h * a21 * k1[i];
      k2 = rhs(yt, kappa_of_t(t + c2 * h), p);
      for (int i = 0; i < kStateDim; ++i)
        yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      k3 = rhs(yt, kappa_of_t(t + c3 * h), p);
      for (int i = 0; i < kStateDim; ++i)
        yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = rhs(yt, kappa_of_t(t + c4 * h), p);
      for (int i = 0; i < kStateDim; ++i)
        yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = rhs(yt, kappa_of_t(t + c5 * h), p);
      for (int i = 0; i < kStateDim; ++i)
        yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                            a64 * k4[i] + a65 * k5[i]);
      k6 = rhs(yt, kappa_of_t(t + h), p);
      for (int i = 0; i < kStateDim; ++i)
        y1[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                            b6 * k6[i]);
      k7 = rhs(y1, kappa_of_t(t + h), p);
      for (int i = 0; i < kStateDim; ++i)
        errv[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                       e6 * k6[i] + e7 * k7[i]);

      double err = finite_state(y1) && finite_state(k7)
                       ? error_norm(y, y1, errv, sc_)
                       : 1e10;
      if (!std::isfinite(err)) err = 1e10;

      if (err > 1.0) {
        const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
        h *= std::min(fac, 0.9);
        rejected_last = true;
        if (h < kMinStep)
          throw IntegrationError(
              "step size underflow (stiffness failure) at t = " +
                  std::to_string(t),
              t);
        continue;
      }

      // accepted: build the continuous extension
      DenseStep ds;
      ds.t = t;
      ds.h = h;
      for (int i = 0; i < kStateDim; ++i) {
        const double ydiff = y1[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        ds.r1[i] = y[i];
        ds.r2[i] = ydiff;
        ds.r3[i] = bspl;
        ds.r4[i] = ydiff - h * k7[i] - bspl;
        ds.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                        d6 * k6[i] + d7 * k7[i]);
      }

      double t_stop = t + h;
      bool fired = false;
      bool multiple = false;
      if (gap) {
        const double g_new = gap(y1);
        if (g_prev < 0.0 && g_new >= 0.0) {
          const double te = detail::locate_in_step(ds, gap, g_prev, g_new,
                                                   sc_.event_time_tol, multiple);
          if (!std::isnan(te)) {
            t_stop = te;
            fired = true;
          }
        } else if (g_prev == 0.0 && g_new > 0.0) {
          // sat exactly on the threshold and moved up: fire at the step start
          t_stop = t;
          fired = true;
        }
        g_prev = g_new;
      }

      // dense samples strictly inside (t0, min(t_stop, t1))
      while (true) {
        const double ts = t0 + static_cast<double>(sample_k) * sample_dt;
        if (ts > t_stop || ts >= t1) break;
        emit(ts, ds.eval(ts));
        ++sample_k;
      }

      if (fired) {
        y = ds.eval(t_stop);
        check_physical(y, t_stop);
        h_carry_ = h;
        return {t_stop, true, multiple};
      }

      t += h;
      y = y1;
      k1 = k7; // FSAL
      check_physical(y, t);

      double fac = (err == 0.0) ? 10.0 : 0.9 * std::pow(err, -0.2);
      fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 10.0);
      rejected_last = false;
      h = std::clamp(h * fac, kMinStep, h_cap);
    }
    h_carry_ = h;
    return {t1, false, false};
  }

  void reset_step() { h_carry_ = 0.0; }

 private:
  SolverConfig sc_;
  double h_carry_ = 0.0;
};

// Classical fixed-step 4th-order reference integrator. Shares no stepping
// machinery with Dopri5; sampling and event location use cubic Hermite
// interpolation on each step.
class Rk4Fixed {
 public:
  Rk4Fixed(double dt, double event_time_tol)
      : dt_(dt), event_time_tol_(event_time_tol) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4: dt must be > 0");
  }

  SegmentOutcome integrate_segment(StateVec& y, double t0, double t1,
                                   const KappaFn& kappa_of_t,
                                   const PhysicalParameters& p,
                                   double sample_dt, const SampleFn& emit,
                                   double /*rate_guard*/,
                                   const EventFn& gap = nullptr) {
    if (!(t1 > t0)) return {t0, false};
    double g_prev = 0.0;
    if (gap) {
      g_prev = gap(y);
      if (g_prev > 0.0) return {t0, true};
    }
    double t = t0;
    long sample_k = 1;
    while (t1 - t > 1e-16 * std::max(1.0, std::abs(t1))) {
      const double h = std::min(dt_, t1 - t);
      StateVec f0 = rhs(y, kappa_of_t(t), p);
      StateVec y1 = step(y, t, h, f0, kappa_of_t, p);
      if (!detail::finite_state(y1))
        throw IntegrationError("non-finite state in fixed-step advance", t);

      double t_stop = t + h;
      bool fired = false;
      StateVec f1{};
      bool have_f1 = false;
      auto hermite = [&](double ts) {
        if (!have_f1) {
          f1 = rhs(y1, kappa_of_t(t + h), p);
          have_f1 = true;
        }
        return hermite_eval(y, f0, y1, f1, t, h, ts);
      };

      if (gap) {
        const double g_new = gap(y1);
        if (g_prev < 0.0 && g_new >= 0.0) {
          double ta = t, tb = t + h;
          while (tb - ta > event_time_tol_) {
            const double tm = 0.5 * (ta + tb);
            if (gap(hermite(tm)) >= 0.0) tb = tm;
            else ta = tm;
          }
          t_stop = tb;
          fired = true;
        } else if (g_prev == 0.0 && g_new > 0.0) {
          t_stop = t;
          fired = true;
        }
        g_prev = g_new;
      }

      while (true) {
        const double ts = t0 + static_cast<double>(sample_k) * sample_dt;
        if (ts > t_stop || ts >= t1) break;
        emit(ts, hermite(ts));
        ++sample_k;
      }

      if (fired) {
        y = hermite(t_stop);
        return {t_stop, true};
      }
      t += h;
      y = y1;
    }
    return {t1, false};
  }

  void reset_step() {}

 private:
  static StateVec step(const StateVec& y, double t, double h, const StateVec& f0,
                       const KappaFn& kappa_of_t, const PhysicalParameters& p) {
    StateVec yt{};
    for (int i = 0; i < kStateDim; ++i) yt[i] = y[i] + 0.5 * h * f0[i];
    const StateVec f2 = rhs(yt, kappa_of_t(t + 0.5 * h), p);
    for (int i = 0; i < kStateDim; ++i) yt[i] = y[i] + 0.5 * h * f2[i];
    const StateVec f3 = rhs(yt, kappa_of_t(t + 0.5 * h), p);
    for (int i = 0; i < kStateDim; ++i) yt[i] = y[i] + h * f3[i];
    const StateVec f4 = rhs(yt, kappa_of_t(t + h), p);
    StateVec out{};
    for (int i = 0; i < kStateDim; ++i)
      out[i] = y[i] + h / 6.0 * (f0[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i]);
    return out;
  }

  static StateVec hermite_eval(const StateVec& y0, const StateVec& f0,
                               const StateVec& y1, const StateVec& f1, double t,
                               double h, double ts) {
    const double u = (ts - t) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    StateVec out{};
    for (int i = 0; i < kStateDim; ++i)
      out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    return out;
  }

  double dt_;
  double event_time_tol_;
};

}  // namespace qbmaser
