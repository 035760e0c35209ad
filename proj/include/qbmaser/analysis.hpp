#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qbmaser/model.hpp"
#include "qbmaser/simulate.hpp"

namespace qbmaser {

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One per-cycle analysis window: samples [begin, end) spanning from the start
// of this cycle's tau_2 to the start of the next cycle's tau_2 (or the end of
// the trajectory), so it contains the emission burst and the following reset.
struct CycleWindow {
  int cycle = 0;
  std::size_t begin = 0, end = 0;
  double t_tau2_start = 0.0;
  double tau_low_realized = 0.0;
  double kappa_at_tau_up_start = std::nan(""); // NaN for the instantaneous scheme
  bool tau_low_capped = false;
};

struct PulseMetrics {
  int cycle = 0;
  double n_ph_max = std::nan("");
  double t_peak_nph = std::nan("");
  double fwhm_nph = std::nan("");
  double fwhm_pout = std::nan("");
  double p_out_max = std::nan("");
  double t_peak_pout = std::nan("");
  double kappa_at_pout_max = std::nan("");
  double n_ph_at_pout_max = std::nan("");
  double p_ins_at_pout_max = std::nan("");
  double eta_work = std::nan("");
  double eta_power_max = std::nan("");
  double tau_low_realized = std::nan("");
  double n_ph_at_tau2_start = std::nan("");
  double kappa_at_tau_up_start = std::nan("");
  std::vector<std::string> flags;
};

inline std::vector<CycleWindow> segment_cycles(const Trajectory& traj) {
  if (traj.phase_log.empty()) throw AnalysisError("segment_cycles: empty phase log");

  // tau_2 of cycle k starts at its first descending-or-low entry
  struct Tau2Start { int cycle; double t; };
  std::vector<Tau2Start> starts;
  int last_cycle_seen = -1;
  for (const auto& e : traj.phase_log) {
    if ((e.phase == Phase::descending || e.phase == Phase::low) &&
        e.cycle != last_cycle_seen) {
      starts.push_back({e.cycle, e.t});
      last_cycle_seen = e.cycle;
    }
  }
  if (starts.empty()) return {};

  std::vector<CycleWindow> windows(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    CycleWindow& w = windows[k];
    w.cycle = starts[k].cycle;
    w.t_tau2_start = starts[k].t;
    const double t_end = (k + 1 < starts.size()) ? starts[k + 1].t
                                                 : traj.samples.back().t;
    auto lo = std::lower_bound(traj.samples.begin(), traj.samples.end(),
                               starts[k].t,
                               [](const Sample& s, double t) { return s.t < t; });
    auto hi = std::lower_bound(traj.samples.begin(), traj.samples.end(), t_end,
                               [](const Sample& s, double t) { return s.t < t; });
    if (k + 1 == starts.size()) hi = traj.samples.end();
    w.begin = static_cast<std::size_t>(lo - traj.samples.begin());
    w.end = static_cast<std::size_t>(hi - traj.samples.begin());

    // realized low duration and the kappa the ascent starts from
    double t_low = std::nan("");
    for (std::size_t i = 0; i < traj.phase_log.size(); ++i) {
      const auto& e = traj.phase_log[i];
      if (e.cycle != w.cycle) continue;
      if (e.phase == Phase::low) {
        t_low = e.t;
        if (i + 1 < traj.phase_log.size())
          w.tau_low_realized = traj.phase_log[i + 1].t - e.t;
      }
      if (e.phase == Phase::ascending) w.kappa_at_tau_up_start = e.kappa;
    }
    if (std::isnan(t_low)) w.tau_low_realized = 0.0; // descent was interrupted
    w.tau_low_capped =
        std::find(traj.capped_cycles.begin(), traj.capped_cycles.end(),
                  w.cycle) != traj.capped_cycles.end();
  }
  return windows;
}

namespace detail {

// parabola through three samples; returns refined (t, y) clamped to the
// bracketing interval and never below the discrete maximum
inline void refine_peak(const double* ts, const double* ys, double& t_pk,
                        double& y_pk) {
  const double t0 = ts[0], t1 = ts[1], t2 = ts[2];
  const double y0 = ys[0], y1 = ys[1], y2 = ys[2];
  const double d01 = (y1 - y0) / (t1 - t0);
  const double d12 = (y2 - y1) / (t2 - t1);
  const double curv = (d12 - d01) / (t2 - t0);
  if (!(curv < 0.0)) return; // not locally concave, keep the sample
  // vertex of the interpolating parabola in Newton form
  const double t_vertex = 0.5 * (t0 + t1) - 0.5 * d01 / curv;
  if (t_vertex <= t0 || t_vertex >= t2) return;
  const double y_vertex =
      y0 + d01 * (t_vertex - t0) + curv * (t_vertex - t0) * (t_vertex - t1);
  // a smooth peak cannot exceed the middle sample by more than the drop to
  // its higher neighbour; larger excesses mean a cusp, keep the sample
  if (y_vertex > y1 + (y1 - std::max(y0, y2))) return;
  if (y_vertex >= y_pk) {
    t_pk = t_vertex;
    y_pk = y_vertex;
  }
}

// Fritsch-Carlson slopes for a strictly monotone-in-t stencil
inline double pchip_slope(double h0, double h1, double d0, double d1) {
  if (d0 == 0.0 || d1 == 0.0 || (d0 > 0) != (d1 > 0)) return 0.0;
  const double w1 = 2.0 * h1 + h0;
  const double w2 = h1 + 2.0 * h0;
  return (w1 + w2) / (w1 / d0 + w2 / d1);
}

// monotone cubic value inside [t[i], t[i+1]] using up to 4 surrounding points
inline double pchip_eval(const std::vector<double>& t,
                         const std::vector<double>& y, std::size_t i,
                         double tq) {
  const std::size_t n = t.size();
  const double h = t[i + 1] - t[i];
  const double d = (y[i + 1] - y[i]) / h;
  double m0 = d, m1 = d;
  if (i > 0) {
    const double hm = t[i] - t[i - 1];
    const double dm = (y[i] - y[i - 1]) / hm;
    m0 = pchip_slope(hm, h, dm, d);
  }
  if (i + 2 < n) {
    const double hp = t[i + 2] - t[i + 1];
    const double dp = (y[i + 2] - y[i + 1]) / hp;
    m1 = pchip_slope(h, hp, d, dp);
  }
  const double u = (tq - t[i]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  const double h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u);
  const double h11 = u * u * (u - 1);
  return h00 * y[i] + h10 * h * m0 + h01 * y[i + 1] + h11 * h * m1;
}

// bisect pchip(t) - level inside one sample interval to time_tol
inline double cross_time(const std::vector<double>& t,
                         const std::vector<double>& y, std::size_t i,
                         double level, double time_tol) {
  double ta = t[i], tb = t[i + 1];
  const bool rising = y[i + 1] >= y[i];
  while (tb - ta > time_tol) {
    const double tm = 0.5 * (ta + tb);
    const double v = pchip_eval(t, y, i, tm);
    if ((v >= level) == rising) tb = tm;
    else ta = tm;
  }
  return 0.5 * (ta + tb);
}

}  // namespace detail

struct FwhmResult {
  bool resolved = false;
  double width = std::nan("");
  double t_peak = std::nan("");
  double y_peak = std::nan("");
  double t_left = std::nan("");
  double t_right = std::nan("");
};

// Full width at half maximum of a sampled pulse. The peak is refined by a
// parabola through the three samples bracketing the discrete maximum; the
// half-maximum crossings are located on a monotone cubic interpolant of the
// dense samples and bisected to time_tol. A side whose crossing never occurs
// inside the window leaves the result unresolved.
inline FwhmResult fwhm(const std::vector<double>& t,
                       const std::vector<double>& y,
                       double time_tol = 1e-13) {
  FwhmResult res;
  const std::size_t n = t.size();
  if (n < 3) return res;
  std::size_t j = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (y[i] > y[j]) j = i;
  if (j == 0 || j + 1 == n) return res; // peak must be strictly interior
  res.t_peak = t[j];
  res.y_peak = y[j];
  detail::refine_peak(&t[j - 1], &y[j - 1], res.t_peak, res.y_peak);
  const double half = 0.5 * res.y_peak;

  std::optional<std::size_t> left, right;
  for (std::size_t i = j; i-- > 0;) {
    if ((y[i] - half) * (y[i + 1] - half) <= 0.0 && y[i] <= half) {
      left = i;
      break;
    }
  }
  for (std::size_t i = j; i + 1 < n; ++i) {
    if ((y[i] - half) * (y[i + 1] - half) <= 0.0 && y[i + 1] <= half) {
      right = i;
      break;
    }
  }
  if (!left || !right) return res;
  res.t_left = detail::cross_time(t, y, *left, half, time_tol);
  res.t_right = detail::cross_time(t, y, *right, half, time_tol);
  res.width = res.t_right - res.t_left;
  res.resolved = res.width > 0.0;
  return res;
}

namespace detail {

// quadratic interpolation of a sampled quantity at the refined peak time
inline double interp_at(const std::vector<double>& t,
                        const std::vector<double>& v, std::size_t j,
                        double tq) {
  if (j == 0 || j + 1 >= t.size()) return v[j];
  const double t0 = t[j - 1], t1 = t[j], t2 = t[j + 1];
  const double l0 = (tq - t1) * (tq - t2) / ((t0 - t1) * (t0 - t2));
  const double l1 = (tq - t0) * (tq - t2) / ((t1 - t0) * (t1 - t2));
  const double l2 = (tq - t0) * (tq - t1) / ((t2 - t0) * (t2 - t1));
  return l0 * v[j - 1] + l1 * v[j] + l2 * v[j + 1];
}

}  // namespace detail

struct EtaWorkResult {
  double value = std::nan("");
  bool flagged = false; // battery gained energy over the window
};

// eta_work = dE_ph / dE from the start of tau_2 to the photon-number peak:
// dE_ph = hbar w_m (n_peak - n_start), dE = E(start) - E(peak) > 0 during
// discharge. A non-positive dE is preserved signed but flagged.
inline EtaWorkResult work_extraction_efficiency(const Trajectory& traj,
                                                const CycleWindow& w,
                                                const PhysicalParameters& p) {
  EtaWorkResult r;
  if (w.end - w.begin < 2) return r;
  std::size_t j = w.begin;
  for (std::size_t i = w.begin; i < w.end; ++i)
    if (traj.samples[i].y[iNph] > traj.samples[j].y[iNph]) j = i;

  std::vector<double> tt, nn, p5;
  const std::size_t a = (j > w.begin) ? j - 1 : j;
  const std::size_t b = std::min(j + 2, w.end);
  for (std::size_t i = a; i < b; ++i) {
    tt.push_back(traj.samples[i].t);
    nn.push_back(traj.samples[i].y[iNph]);
    p5.push_back(traj.samples[i].y[iP5]);
  }
  double t_pk = traj.samples[j].t;
  double n_pk = traj.samples[j].y[iNph];
  double p5_pk = traj.samples[j].y[iP5];
  if (tt.size() == 3) {
    detail::refine_peak(tt.data(), nn.data(), t_pk, n_pk);
    p5_pk = detail::interp_at(tt, p5, 1, t_pk);
  }

  const Sample& s0 = traj.samples[w.begin];
  const double de_ph = hbar * p.omega_m * (n_pk - s0.y[iNph]);
  const double de =
      p.n_pen * hbar * p.omega_35 * (s0.y[iP5] - p5_pk);
  if (de == 0.0) {
    r.flagged = true;
    return r;
  }
  r.value = de_ph / de;
  r.flagged = de <= 0.0;
  return r;
}

struct EtaPowerResult {
  double value = std::nan("");
  bool undefined = false; // |P_ins| at the output peak below the floor
  double p_out_max = std::nan("");
  double t_peak = std::nan("");
  double kappa = std::nan("");
  double n_ph = std::nan("");
  double p_ins = std::nan("");
};

// power compression factor at the output-power maximum of the window
inline EtaPowerResult power_compression(const Trajectory& traj,
                                        const CycleWindow& w,
                                        const PhysicalParameters& p) {
  EtaPowerResult r;
  if (w.end - w.begin < 1) return r;
  std::size_t j = w.begin;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = w.begin; i < w.end; ++i) {
    const Sample& s = traj.samples[i];
    const double po = output_power(s.y[iNph], s.kappa, p);
    if (po > best) {
      best = po;
      j = i;
    }
  }
  const Sample& s = traj.samples[j];
  r.p_out_max = best;
  r.t_peak = s.t;
  r.kappa = s.kappa;
  r.n_ph = s.y[iNph];
  r.p_ins = instantaneous_power(s.y, s.kappa, p);
  if (std::abs(r.p_ins) < 1e-30) {
    r.undefined = true;
    return r;
  }
  r.value = r.p_out_max / std::abs(r.p_ins);
  return r;
}

// All per-cycle figures of merit. Individual failures mark the row and never
// abort the table.
inline std::vector<PulseMetrics> pulse_metrics(const Trajectory& traj,
                                               const PhysicalParameters& p,
                                               double fwhm_time_tol = 1e-13) {
  std::vector<PulseMetrics> rows;
  for (const CycleWindow& w : segment_cycles(traj)) {
    PulseMetrics m;
    m.cycle = w.cycle;
    m.tau_low_realized = w.tau_low_realized;
    m.kappa_at_tau_up_start = w.kappa_at_tau_up_start;
    if (w.tau_low_capped) m.flags.push_back("tau_low_capped");
    if (w.end <= w.begin) {
      m.flags.push_back("empty_window");
      rows.push_back(std::move(m));
      continue;
    }
    m.n_ph_at_tau2_start = traj.samples[w.begin].y[iNph];

    std::vector<double> tt(w.end - w.begin), nn(w.end - w.begin),
        po(w.end - w.begin);
    for (std::size_t i = w.begin; i < w.end; ++i) {
      tt[i - w.begin] = traj.samples[i].t;
      nn[i - w.begin] = traj.samples[i].y[iNph];
      po[i - w.begin] = output_power(traj.samples[i].y[iNph],
                                     traj.samples[i].kappa, p);
    }

    const FwhmResult fn = fwhm(tt, nn, fwhm_time_tol);
    m.t_peak_nph = fn.t_peak;
    m.n_ph_max = fn.y_peak;
    if (fn.resolved) m.fwhm_nph = fn.width;
    else m.flags.push_back("fwhm_nph_unresolved");
    if (std::isnan(m.n_ph_max)) { // peak at the window edge
      std::size_t j = w.begin;
      for (std::size_t i = w.begin; i < w.end; ++i)
        if (traj.samples[i].y[iNph] > traj.samples[j].y[iNph]) j = i;
      m.n_ph_max = traj.samples[j].y[iNph];
      m.t_peak_nph = traj.samples[j].t;
    }

    const FwhmResult fp = fwhm(tt, po, fwhm_time_tol);
    if (fp.resolved) m.fwhm_pout = fp.width;
    else m.flags.push_back("fwhm_pout_unresolved");

    const EtaWorkResult ew = work_extraction_efficiency(traj, w, p);
    m.eta_work = ew.value;
    if (ew.flagged) m.flags.push_back("eta_work_nonpositive_battery_release");

    const EtaPowerResult ep = power_compression(traj, w, p);
    m.p_out_max = ep.p_out_max;
    m.t_peak_pout = ep.t_peak;
    m.kappa_at_pout_max = ep.kappa;
    m.n_ph_at_pout_max = ep.n_ph;
    m.p_ins_at_pout_max = ep.p_ins;
    m.eta_power_max = ep.value;
    if (ep.undefined) m.flags.push_back("eta_power_p_ins_below_floor");

    rows.push_back(std::move(m));
  }
  return rows;
}

}  // namespace qbmaser
