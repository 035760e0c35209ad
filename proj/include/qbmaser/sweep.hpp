#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qbmaser/analysis.hpp"
#include "qbmaser/config.hpp"
#include "qbmaser/io.hpp"
#include "qbmaser/simulate.hpp"

namespace qbmaser {

enum class SweepAxis { tau_2, kappa_low, tau_1 };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::tau_2: return "tau_2";
    case SweepAxis::kappa_low: return "kappa_low";
    case SweepAxis::tau_1: return "tau_1";
  }
  return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "tau_2") return SweepAxis::tau_2;
  if (s == "kappa_low") return SweepAxis::kappa_low;
  if (s == "tau_1") return SweepAxis::tau_1;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

// Grid specification for one-axis parameter studies. tau_2 / tau_1 values are
// seconds; kappa_low values are ordinary-frequency Hz matching the
// kappa_low_over_2pi_hz config entry.
struct SweepSpec {
  SweepAxis axis = SweepAxis::tau_2;
  std::vector<double> grid;
  std::vector<Scheme> schemes;
  int target_cycle = 1;
  json base; // full run-config document
  // per-scheme RFC 7386 merge patches onto the base document, applied before
  // the axis override (e.g. a scheme-specific fixed tau_2)
  json scheme_overrides = json::object();
  bool write_point_trajectories = false;
};

struct SweepRow {
  Scheme scheme = Scheme::instantaneous;
  double axis_value = 0.0;
  int target_cycle = 1;
  std::optional<PulseMetrics> metrics;
  double t_charge_resolved = std::nan("");
  std::string failure; // empty on success
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRow> rows; // ordered by (scheme, grid index)
};

inline SweepSpec load_sweep_spec(const json& doc) {
  cfg::require_keys(doc, "sweep",
                    {"axis", "grid", "schemes", "target_cycle", "base",
                     "scheme_overrides", "write_point_trajectories"},
                    {"axis", "grid", "schemes", "base"});
  SweepSpec sp;
  sp.axis = sweep_axis_from_string(doc.at("axis").get<std::string>());
  if (!doc.at("grid").is_array() || doc.at("grid").empty())
    throw ConfigError("sweep.grid: expected a non-empty array of numbers");
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& v : doc.at("grid")) {
    if (!v.is_number()) throw ConfigError("sweep.grid: expected numbers");
    const double x = v.get<double>();
    if (!(x > prev))
      throw ConfigError("sweep.grid: values must be strictly increasing");
    prev = x;
    sp.grid.push_back(x);
  }
  if (!doc.at("schemes").is_array() || doc.at("schemes").empty())
    throw ConfigError("sweep.schemes: expected a non-empty array");
  for (const auto& v : doc.at("schemes"))
    sp.schemes.push_back(scheme_from_string(v.get<std::string>()));
  if (doc.count("target_cycle")) {
    if (!doc.at("target_cycle").is_number_integer())
      throw ConfigError("sweep.target_cycle: expected an integer");
    sp.target_cycle = doc.at("target_cycle").get<int>();
  }
  if (!(sp.target_cycle >= 1))
    throw ConfigError("sweep.target_cycle: must be >= 1");
  sp.base = doc.at("base");
  if (doc.count("scheme_overrides")) {
    const json& ov = doc.at("scheme_overrides");
    if (!ov.is_object())
      throw ConfigError("sweep.scheme_overrides: expected an object keyed by scheme");
    for (auto it = ov.begin(); it != ov.end(); ++it)
      scheme_from_string(it.key()); // validates the key
    sp.scheme_overrides = ov;
  }
  if (doc.count("write_point_trajectories"))
    sp.write_point_trajectories = doc.at("write_point_trajectories").get<bool>();
  return sp;
}

// run-config document for one grid point
inline json sweep_point_config(const SweepSpec& sp, Scheme scheme,
                               double value) {
  json doc = sp.base;
  doc["schedule"]["scheme"] = to_string(scheme);
  if (sp.scheme_overrides.count(to_string(scheme)))
    doc.merge_patch(sp.scheme_overrides.at(to_string(scheme)));
  switch (sp.axis) {
    case SweepAxis::tau_2:
      doc["schedule"]["termination"] = {{"fixed", value}};
      break;
    case SweepAxis::kappa_low:
      doc["schedule"]["kappa_low_over_2pi_hz"] = value;
      break;
    case SweepAxis::tau_1:
      doc["schedule"]["tau_1_s"] = value;
      break;
  }
  return doc;
}

// One grid point, identical whether run alone or inside the full sweep.
inline SweepRow run_sweep_point(const SweepSpec& sp, Scheme scheme,
                                double value,
                                Trajectory* traj_out = nullptr) {
  SweepRow row;
  row.scheme = scheme;
  row.axis_value = value;
  row.target_cycle = sp.target_cycle;
  try {
    const RunConfig rc = load_run_config(sweep_point_config(sp, scheme, value));
    if (rc.schedule.n_cycles < sp.target_cycle)
      throw ConfigError("base.n_cycles smaller than target_cycle");
    Trajectory traj = run_simulation(rc.params, rc.schedule, rc.solver);
    row.t_charge_resolved = traj.t_charge_resolved;
    const auto rows = pulse_metrics(traj, rc.params);
    for (const auto& m : rows)
      if (m.cycle == sp.target_cycle) row.metrics = m;
    if (!row.metrics) row.failure = "target cycle missing from the trajectory";
    if (traj_out) *traj_out = std::move(traj);
  } catch (const std::exception& e) {
    row.failure = e.what();
  }
  return row;
}

// Embarrassingly parallel over grid points; rows are merged back in
// (scheme, grid index) order regardless of scheduling. `traj_sink`, when set,
// receives each point's full trajectory (used for the optional per-point
// exports); it must be safe to call concurrently for distinct points.
inline SweepResult run_sweep(
    const SweepSpec& sp, unsigned workers = 1,
    const std::function<void(std::size_t, std::size_t, const SweepRow&)>&
        progress = nullptr,
    const std::function<void(std::size_t, const SweepRow&, const Trajectory&)>&
        traj_sink = nullptr) {
  SweepResult result;
  result.spec = sp;
  const std::size_t npoints = sp.schemes.size() * sp.grid.size();
  result.rows.resize(npoints);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= npoints) return;
      const Scheme scheme = sp.schemes[i / sp.grid.size()];
      const double value = sp.grid[i % sp.grid.size()];
      if (traj_sink) {
        Trajectory traj;
        result.rows[i] = run_sweep_point(sp, scheme, value, &traj);
        if (result.rows[i].failure.empty()) traj_sink(i, result.rows[i], traj);
      } else {
        result.rows[i] = run_sweep_point(sp, scheme, value);
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) progress(d, npoints, result.rows[i]);
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(workers, npoints ? npoints : 1);
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return result;
}

inline const char* sweep_csv_header() {
  return "scheme,axis,axis_value,target_cycle,failure,cycle,n_ph_max,"
         "t_peak_nph_s,fwhm_nph_s,fwhm_pout_s,p_out_max_w,t_peak_pout_s,"
         "kappa_at_pout_max_rad_s,n_ph_at_pout_max,p_ins_at_pout_max_w,"
         "eta_work,eta_power_max,tau_low_realized_s,n_ph_at_tau2_start,"
         "kappa_at_tau_up_start_rad_s,flags";
}

inline std::string sweep_to_csv(const SweepResult& res) {
  std::string s = sweep_csv_header();
  s += '\n';
  for (const SweepRow& r : res.rows) {
    s += to_string(r.scheme);
    s += ',';
    s += to_string(res.spec.axis);
    s += ',';
    s += fmt_g17(r.axis_value);
    s += ',';
    s += std::to_string(r.target_cycle);
    s += ',';
    std::string failure = r.failure;
    for (char& ch : failure)
      if (ch == ',' || ch == '\n') ch = ';';
    s += failure;
    s += ',';
    s += r.metrics ? metrics_csv_row(*r.metrics)
                   : metrics_csv_row(PulseMetrics{});
    s += '\n';
  }
  return s;
}

inline json sweep_to_json(const SweepResult& res) {
  json rows = json::array();
  for (const SweepRow& r : res.rows) {
    json o = {{"scheme", to_string(r.scheme)},
              {"axis", to_string(res.spec.axis)},
              {"axis_value", r.axis_value},
              {"target_cycle", r.target_cycle},
              {"t_charge_resolved_s", r.t_charge_resolved},
              {"failure", r.failure}};
    if (r.metrics) o["metrics"] = metrics_json({*r.metrics})[0];
    rows.push_back(std::move(o));
  }
  return {{"axis", to_string(res.spec.axis)},
          {"target_cycle", res.spec.target_cycle},
          {"rows", rows}};
}

}  // namespace qbmaser
