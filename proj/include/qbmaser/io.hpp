#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qbmaser/analysis.hpp"
#include "qbmaser/config.hpp"
#include "qbmaser/simulate.hpp"

namespace qbmaser {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// write-to-temp then rename, so failures never leave partial files behind
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed for '" + path.string() + "': " + ec.message());
}

inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trajectory_csv(const Trajectory& traj,
                                  const PhysicalParameters& p) {
  std::string s;
  s.reserve(traj.samples.size() * 220 + 256);
  s += "t_s,kappa_rad_s,p1,p2,p3,p4,p5,n_ph,coh_re,coh_im,corr,energy_j,"
       "p_ins_w,p_out_w\n";
  for (const Sample& smp : traj.samples) {
    const StateVec& y = smp.y;
    s += fmt_g17(smp.t);
    s += ',';
    s += fmt_g17(smp.kappa);
    for (int i = 0; i < kStateDim; ++i) {
      s += ',';
      s += fmt_g17(y[i]);
    }
    s += ',';
    s += fmt_g17(battery_energy(y, p));
    s += ',';
    s += fmt_g17(instantaneous_power(y, smp.kappa, p));
    s += ',';
    s += fmt_g17(output_power(y[iNph], smp.kappa, p));
    s += '\n';
  }
  return s;
}

inline std::string phase_log_jsonl(const Trajectory& traj) {
  std::string s;
  for (const PhaseLogEntry& e : traj.phase_log) {
    json line = {{"t_s", e.t},
                 {"phase", to_string(e.phase)},
                 {"cycle", e.cycle},
                 {"kappa_rad_s", e.kappa}};
    s += line.dump();
    s += '\n';
  }
  return s;
}

inline json metrics_json(const std::vector<PulseMetrics>& rows) {
  json arr = json::array();
  for (const PulseMetrics& m : rows) {
    json o = {{"cycle", m.cycle},
              {"n_ph_max", m.n_ph_max},
              {"t_peak_nph_s", m.t_peak_nph},
              {"fwhm_nph_s", m.fwhm_nph},
              {"fwhm_pout_s", m.fwhm_pout},
              {"p_out_max_w", m.p_out_max},
              {"t_peak_pout_s", m.t_peak_pout},
              {"kappa_at_pout_max_rad_s", m.kappa_at_pout_max},
              {"n_ph_at_pout_max", m.n_ph_at_pout_max},
              {"p_ins_at_pout_max_w", m.p_ins_at_pout_max},
              {"eta_work", m.eta_work},
              {"eta_power_max", m.eta_power_max},
              {"tau_low_realized_s", m.tau_low_realized},
              {"n_ph_at_tau2_start", m.n_ph_at_tau2_start},
              {"kappa_at_tau_up_start_rad_s", m.kappa_at_tau_up_start},
              {"flags", m.flags}};
    arr.push_back(std::move(o));
  }
  return arr;
}

inline const char* metrics_csv_header() {
  return "cycle,n_ph_max,t_peak_nph_s,fwhm_nph_s,fwhm_pout_s,p_out_max_w,"
         "t_peak_pout_s,kappa_at_pout_max_rad_s,n_ph_at_pout_max,"
         "p_ins_at_pout_max_w,eta_work,eta_power_max,tau_low_realized_s,"
         "n_ph_at_tau2_start,kappa_at_tau_up_start_rad_s,flags";
}

inline std::string metrics_csv_row(const PulseMetrics& m) {
  std::string s = std::to_string(m.cycle);
  for (double v : {m.n_ph_max, m.t_peak_nph, m.fwhm_nph, m.fwhm_pout,
                   m.p_out_max, m.t_peak_pout, m.kappa_at_pout_max,
                   m.n_ph_at_pout_max, m.p_ins_at_pout_max, m.eta_work,
                   m.eta_power_max, m.tau_low_realized, m.n_ph_at_tau2_start,
                   m.kappa_at_tau_up_start}) {
    s += ',';
    s += fmt_g17(v);
  }
  s += ',';
  for (std::size_t i = 0; i < m.flags.size(); ++i) {
    if (i) s += ';';
    s += m.flags[i];
  }
  return s;
}

inline std::string metrics_csv(const std::vector<PulseMetrics>& rows) {
  std::string s = metrics_csv_header();
  s += '\n';
  for (const PulseMetrics& m : rows) {
    s += metrics_csv_row(m);
    s += '\n';
  }
  return s;
}

// manifest: enough to re-run the identical computation
inline json make_manifest(const RunConfig& rc, const Trajectory& traj,
                          const std::string& kind) {
  json cfg = rc.raw;
  cfg["schedule"]["t_charge_s"] = traj.t_charge_resolved;
  if (rc.schedule.scheme != Scheme::instantaneous) {
    cfg["schedule"]["tau_down_s"] = rc.schedule.tau_down;
    cfg["schedule"]["tau_up_s"] = rc.schedule.tau_up;
  }
  json manifest = {
      {"kind", kind},
      {"config", cfg},
      {"conventions",
       {{"angular_units",
         "*_over_2pi_hz entries are multiplied by 2*pi at load (rad/s "
         "internally)"},
        {"plain_rates", "*_hz entries are first-order rates in 1/s"},
        {"tau_down_auto", "2/kappa_low with kappa_low as configured by "
                          "tau_down_auto_convention"}}},
      {"resolved",
       {{"t_charge_s", traj.t_charge_resolved},
        {"tau_down_s", rc.schedule.tau_down},
        {"tau_up_s", rc.schedule.tau_up},
        {"xi_hz", rc.params.pump_rate()},
        {"kappa_high_rad_s", rc.schedule.kappa_high},
        {"kappa_low_rad_s", rc.schedule.kappa_low},
        {"kappa_0_rad_s", rc.params.kappa_0}}},
      {"warnings", traj.warnings}};
  return manifest;
}

}  // namespace qbmaser
