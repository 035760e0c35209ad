#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbmaser/parameters.hpp"
#include "qbmaser/schedule.hpp"
#include "qbmaser/solver.hpp"

namespace qbmaser {

using nlohmann::json;

struct OutputConfig {
  std::string directory = "out";
  bool write_trajectory = true;
  bool write_phase_log = true;
  bool write_metrics = true;
};

struct RunConfig {
  PhysicalParameters params;
  ScheduleConfig schedule;
  SolverConfig solver;
  OutputConfig output;
  std::string provenance_note;
  json raw; // normalized config document, used for manifests and re-runs
};

namespace cfg {

inline void require_keys(const json& o, const std::string& where,
                         const std::set<std::string>& allowed,
                         const std::set<std::string>& required) {
  if (!o.is_object())
    throw ConfigError(where + ": expected a JSON object");
  for (auto it = o.begin(); it != o.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
  for (const auto& k : required)
    if (!o.count(k))
      throw ConfigError(where + ": missing key '" + k + "'");
}

inline double num(const json& o, const std::string& where, const std::string& key) {
  const json& v = o.at(key);
  if (!v.is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline double num_or(const json& o, const std::string& where,
                     const std::string& key, double dflt) {
  if (!o.count(key)) return dflt;
  return num(o, where, key);
}

inline bool flag_or(const json& o, const std::string& where,
                    const std::string& key, bool dflt) {
  if (!o.count(key)) return dflt;
  const json& v = o.at(key);
  if (!v.is_boolean())
    throw ConfigError(where + "." + key + ": expected a boolean");
  return v.get<bool>();
}

// value may be the string "auto" (returns NaN) or a number
inline double num_or_auto(const json& o, const std::string& where,
                          const std::string& key) {
  const json& v = o.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return std::nan("");
    throw ConfigError(where + "." + key + ": expected a number or \"auto\"");
  }
  if (!v.is_number())
    throw ConfigError(where + "." + key + ": expected a number or \"auto\"");
  return v.get<double>();
}

}  // namespace cfg

// Entries named *_over_2pi_hz are multiplied by 2*pi at load; *_hz entries
// are plain first-order rates used as-is.
inline PhysicalParameters load_params(const json& o) {
  using namespace cfg;
  const std::string w = "params";
  require_keys(
      o, w,
      {"omega_m_over_2pi_hz", "omega_35_over_2pi_hz", "g_35_over_2pi_hz",
       "n_pen", "pump_power_w", "xi_per_watt_hz", "k_sp_hz", "k_23_hz",
       "k_24_hz", "k_25_hz", "k_31_hz", "k_41_hz", "k_51_hz", "k_34_hz",
       "k_43_hz", "k_35_hz", "k_53_hz", "k_45_hz", "k_54_hz",
       "chi_34_over_2pi_hz", "chi_35_over_2pi_hz", "chi_45_over_2pi_hz",
       "kappa0_over_2pi_hz", "n_th", "temperature_k",
       "include_thermal_photons"},
      {"omega_m_over_2pi_hz", "omega_35_over_2pi_hz", "g_35_over_2pi_hz",
       "n_pen", "pump_power_w", "xi_per_watt_hz", "k_sp_hz", "k_23_hz",
       "k_24_hz", "k_25_hz", "k_31_hz", "k_41_hz", "k_51_hz", "k_34_hz",
       "k_43_hz", "k_35_hz", "k_53_hz", "k_45_hz", "k_54_hz",
       "chi_34_over_2pi_hz", "chi_35_over_2pi_hz", "chi_45_over_2pi_hz",
       "kappa0_over_2pi_hz", "n_th"});
  PhysicalParameters p;
  p.omega_m = two_pi * num(o, w, "omega_m_over_2pi_hz");
  p.omega_35 = two_pi * num(o, w, "omega_35_over_2pi_hz");
  p.g_35 = two_pi * num(o, w, "g_35_over_2pi_hz");
  p.n_pen = num(o, w, "n_pen");
  p.pump_power = num(o, w, "pump_power_w");
  p.xi_per_watt = num(o, w, "xi_per_watt_hz");
  p.k_sp = num(o, w, "k_sp_hz");
  p.k_23 = num(o, w, "k_23_hz");
  p.k_24 = num(o, w, "k_24_hz");
  p.k_25 = num(o, w, "k_25_hz");
  p.k_31 = num(o, w, "k_31_hz");
  p.k_41 = num(o, w, "k_41_hz");
  p.k_51 = num(o, w, "k_51_hz");
  p.k_34 = num(o, w, "k_34_hz");
  p.k_43 = num(o, w, "k_43_hz");
  p.k_35 = num(o, w, "k_35_hz");
  p.k_53 = num(o, w, "k_53_hz");
  p.k_45 = num(o, w, "k_45_hz");
  p.k_54 = num(o, w, "k_54_hz");
  p.chi_34 = two_pi * num(o, w, "chi_34_over_2pi_hz");
  p.chi_35 = two_pi * num(o, w, "chi_35_over_2pi_hz");
  p.chi_45 = two_pi * num(o, w, "chi_45_over_2pi_hz");
  p.kappa_0 = two_pi * num(o, w, "kappa0_over_2pi_hz");
  p.n_th = num(o, w, "n_th");
  p.temperature = num_or(o, w, "temperature_k", 293.0);
  p.include_thermal_photons = flag_or(o, w, "include_thermal_photons", false);
  return p;
}

inline ScheduleConfig load_schedule(const json& o) {
  using namespace cfg;
  const std::string w = "schedule";
  require_keys(o, w,
               {"scheme", "kappa_high_over_2pi_hz", "kappa_low_over_2pi_hz",
                "tau_1_s", "tau_down_s", "tau_up_s",
                "tau_down_auto_convention", "termination", "n_cycles",
                "t_charge_s", "tau_low_max_s", "seed_photons"},
               {"scheme", "kappa_high_over_2pi_hz", "kappa_low_over_2pi_hz",
                "tau_1_s", "termination", "n_cycles", "t_charge_s"});
  ScheduleConfig c;
  if (!o.at("scheme").is_string())
    throw ConfigError("schedule.scheme: expected a string");
  c.scheme = scheme_from_string(o.at("scheme").get<std::string>());
  c.kappa_high = two_pi * num(o, w, "kappa_high_over_2pi_hz");
  c.kappa_low = two_pi * num(o, w, "kappa_low_over_2pi_hz");
  c.tau_1 = num(o, w, "tau_1_s");

  // tau_down "auto" means 2/kappa_low; the convention knob selects whether
  // kappa_low enters as an angular rate (default) or as an ordinary frequency
  std::string conv = "angular";
  if (o.count("tau_down_auto_convention")) {
    conv = o.at("tau_down_auto_convention").get<std::string>();
    if (conv != "angular" && conv != "ordinary")
      throw ConfigError(
          "schedule.tau_down_auto_convention: expected \"angular\" or "
          "\"ordinary\"");
  }
  const double kappa_low_for_tau =
      (conv == "angular") ? c.kappa_low : c.kappa_low / two_pi;
  if (c.scheme == Scheme::instantaneous) {
    c.tau_down = 0.0;
    c.tau_up = 0.0;
    if (o.count("tau_down_s") && !o.at("tau_down_s").is_string() &&
        num(o, w, "tau_down_s") != 0.0)
      throw ConfigError(
          "schedule.tau_down_s: must be 0 or \"auto\" for the instantaneous "
          "scheme");
    if (o.count("tau_up_s") && !o.at("tau_up_s").is_string() &&
        num(o, w, "tau_up_s") != 0.0)
      throw ConfigError(
          "schedule.tau_up_s: must be 0 or \"auto\" for the instantaneous "
          "scheme");
  } else {
    double td = o.count("tau_down_s") ? num_or_auto(o, w, "tau_down_s")
                                      : std::nan("");
    if (std::isnan(td)) td = 2.0 / kappa_low_for_tau;
    double tu = o.count("tau_up_s") ? num_or_auto(o, w, "tau_up_s")
                                    : std::nan("");
    if (std::isnan(tu)) tu = td;
    c.tau_down = td;
    c.tau_up = tu;
  }

  const json& term = o.at("termination");
  require_keys(term, "schedule.termination", {"threshold", "fixed"}, {});
  if (term.count("threshold") == term.count("fixed"))
    throw ConfigError(
        "schedule.termination: exactly one of 'threshold' or 'fixed' is "
        "required");
  if (term.count("threshold")) {
    c.termination.mode = Termination::Mode::threshold;
    c.termination.threshold_photons = num(term, "schedule.termination", "threshold");
  } else {
    c.termination.mode = Termination::Mode::fixed;
    c.termination.tau_2 = num(term, "schedule.termination", "fixed");
  }

  if (!o.at("n_cycles").is_number_integer())
    throw ConfigError("schedule.n_cycles: expected an integer");
  c.n_cycles = o.at("n_cycles").get<int>();
  c.t_charge = num_or_auto(o, w, "t_charge_s");
  c.tau_low_max = num_or(o, w, "tau_low_max_s", 1e-5);
  c.seed_photons = num_or(o, w, "seed_photons", 0.0);
  return c;
}

inline SolverConfig load_solver(const json& o) {
  using namespace cfg;
  const std::string w = "solver";
  require_keys(o, w,
               {"rel_tol", "abs_tol", "abs_tol_n_ph", "max_step_s",
                "initial_step_s", "sample_dt_tau2_s", "sample_dt_coarse_s",
                "event_time_tol_s"},
               {});
  SolverConfig sc;
  sc.rel_tol = num_or(o, w, "rel_tol", sc.rel_tol);
  sc.abs_tol = num_or(o, w, "abs_tol", sc.abs_tol);
  sc.abs_tol_n_ph = num_or(o, w, "abs_tol_n_ph", sc.abs_tol_n_ph);
  sc.max_step = num_or(o, w, "max_step_s", sc.max_step);
  sc.initial_step = num_or(o, w, "initial_step_s", sc.initial_step);
  sc.sample_dt_tau2 = num_or(o, w, "sample_dt_tau2_s", sc.sample_dt_tau2);
  sc.sample_dt_coarse = num_or(o, w, "sample_dt_coarse_s", sc.sample_dt_coarse);
  sc.event_time_tol = num_or(o, w, "event_time_tol_s", sc.event_time_tol);
  return sc;
}

inline OutputConfig load_output(const json& o) {
  using namespace cfg;
  const std::string w = "output";
  require_keys(o, w,
               {"directory", "write_trajectory", "write_phase_log",
                "write_metrics"},
               {});
  OutputConfig oc;
  if (o.count("directory")) oc.directory = o.at("directory").get<std::string>();
  oc.write_trajectory = flag_or(o, w, "write_trajectory", true);
  oc.write_phase_log = flag_or(o, w, "write_phase_log", true);
  oc.write_metrics = flag_or(o, w, "write_metrics", true);
  return oc;
}

inline RunConfig load_run_config(const json& doc) {
  cfg::require_keys(doc, "config",
                    {"params", "schedule", "solver", "output",
                     "provenance_note"},
                    {"params", "schedule"});
  RunConfig rc;
  rc.params = load_params(doc.at("params"));
  rc.schedule = load_schedule(doc.at("schedule"));
  rc.solver = doc.count("solver") ? load_solver(doc.at("solver")) : SolverConfig{};
  rc.output = doc.count("output") ? load_output(doc.at("output")) : OutputConfig{};
  if (doc.count("provenance_note"))
    rc.provenance_note = doc.at("provenance_note").get<std::string>();
  rc.raw = doc;

  validate_parameters(rc.params, rc.schedule.kappa_low);
  validate_schedule(rc.schedule);
  validate_solver(rc.solver);
  return rc;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return doc;
}

// dotted-path override: "schedule.termination.fixed=440e-9". The value is
// parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (...) {
    parsed = value;
  }

  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty())
      throw ConfigError("override '" + assignment + "': empty path segment");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("override '" + assignment + "': empty path");

  json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path '" + path + "' does not address an object");
    node = &(*node)[parts[i]];
  }
  // replacing a termination mode swaps the object wholesale
  if (parts.size() >= 2 && parts[parts.size() - 2] == "termination" &&
      (parts.back() == "fixed" || parts.back() == "threshold")) {
    *node = json::object();
  }
  (*node)[parts.back()] = parsed;
}

}  // namespace qbmaser
