// Command-line front end: simulate / sweep / oracle-check over JSON configs,
// CSV + JSON outputs with a re-runnable manifest next to every result.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "qbmaser/qbmaser.hpp"

namespace fs = std::filesystem;
using namespace qbmaser;

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitIntegrationError = 2;
constexpr int kExitOracleMismatch = 3;

fs::path preset_dir() {
  if (const char* env = std::getenv("QBMASER_PRESET_DIR")) return env;
  const fs::path built_in = QBMASER_PRESET_DIR;
  if (fs::exists(built_in)) return built_in;
  return "presets";
}

json load_config_doc(const std::string& config_path,
                     const std::vector<std::string>& overrides,
                     const std::string& scheme_override) {
  json doc = read_json_file(config_path);
  if (!scheme_override.empty())
    apply_override(doc, "schedule.scheme=" + scheme_override);
  for (const auto& ov : overrides) apply_override(doc, ov);
  return doc;
}

int run_simulate(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& scheme_override, const std::string& out_dir,
                 bool quiet) {
  RunConfig rc;
  try {
    rc = load_run_config(load_config_doc(config_path, overrides, scheme_override));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (!out_dir.empty()) rc.output.directory = out_dir;

  Trajectory traj;
  try {
    traj = run_simulation(rc.params, rc.schedule, rc.solver);
  } catch (const IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << "\n";
    return kExitIntegrationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIntegrationError;
  }

  const auto metrics = pulse_metrics(traj, rc.params);
  const fs::path dir = rc.output.directory;
  const json manifest = make_manifest(rc, traj, "simulate");
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  if (rc.output.write_trajectory)
    write_text_atomic(dir / "trajectory.csv", trajectory_csv(traj, rc.params));
  if (rc.output.write_phase_log)
    write_text_atomic(dir / "phase_log.jsonl", phase_log_jsonl(traj));
  if (rc.output.write_metrics) {
    write_text_atomic(dir / "metrics.json", metrics_json(metrics).dump(2) + "\n");
    write_text_atomic(dir / "metrics.csv", metrics_csv(metrics));
  }
  for (const std::string& w : traj.warnings) std::cerr << "warning: " << w << "\n";
  if (!quiet) {
    std::cout << "simulate: " << traj.samples.size() << " samples, "
              << metrics.size() << " cycles, t_charge = "
              << traj.t_charge_resolved << " s -> " << dir.string() << "\n";
  }
  return 0;
}

int run_sweep_cmd(std::string spec_path, const std::string& preset,
                  const std::vector<std::string>& overrides,
                  const std::string& out_dir, unsigned workers, bool quiet) {
  if (!preset.empty()) {
    if (!spec_path.empty()) {
      std::cerr << "spec error: give either a spec file or --preset, not both\n";
      return kExitConfigError;
    }
    spec_path = (preset_dir() / (preset + ".json")).string();
  }
  if (spec_path.empty()) {
    std::cerr << "spec error: a sweep spec file or --preset is required\n";
    return kExitConfigError;
  }

  SweepSpec sp;
  try {
    json doc = read_json_file(spec_path);
    for (const auto& ov : overrides) apply_override(doc, ov);
    sp = load_sweep_spec(doc);
  } catch (const std::exception& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitConfigError;
  }

  std::mutex io_mutex;
  auto progress = [&](std::size_t done, std::size_t total, const SweepRow& row) {
    if (quiet) return;
    std::lock_guard<std::mutex> lock(io_mutex);
    std::cerr << "[" << done << "/" << total << "] " << to_string(row.scheme)
              << " " << to_string(sp.axis) << "=" << row.axis_value
              << (row.failure.empty() ? " ok" : " FAILED: " + row.failure)
              << "\n";
  };
  const fs::path dir = out_dir.empty() ? fs::path("sweep_out") : fs::path(out_dir);
  std::function<void(std::size_t, const SweepRow&, const Trajectory&)> traj_sink;
  if (sp.write_point_trajectories) {
    traj_sink = [&](std::size_t index, const SweepRow& row, const Trajectory& traj) {
      const RunConfig prc =
          load_run_config(sweep_point_config(sp, row.scheme, row.axis_value));
      char name[128];
      std::snprintf(name, sizeof name, "point_%03zu_%s_trajectory.csv", index,
                    to_string(row.scheme));
      write_text_atomic(dir / "points" / name, trajectory_csv(traj, prc.params));
    };
  }
  const SweepResult res = run_sweep(sp, workers, progress, traj_sink);
  write_text_atomic(dir / "sweep.csv", sweep_to_csv(res));
  write_text_atomic(dir / "sweep.json", sweep_to_json(res).dump(2) + "\n");
  json manifest = {{"kind", "sweep"},
                   {"spec_path", spec_path},
                   {"axis", to_string(sp.axis)},
                   {"grid", sp.grid},
                   {"target_cycle", sp.target_cycle},
                   {"workers", workers},
                   {"base", sp.base}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

  std::size_t failures = 0;
  for (const auto& r : res.rows)
    if (!r.failure.empty()) ++failures;
  if (!quiet)
    std::cout << "sweep: " << res.rows.size() << " points, " << failures
              << " failed -> " << dir.string() << "\n";
  return 0;
}

int run_oracle_check(const std::string& config_path,
                     const std::vector<std::string>& overrides,
                     const std::string& scheme_override, double dt,
                     bool quiet) {
  RunConfig rc;
  try {
    rc = load_run_config(load_config_doc(config_path, overrides, scheme_override));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  OracleComparison cmp;
  try {
    cmp = compare_first_pulse(rc.params, rc.schedule, rc.solver, dt);
  } catch (const IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << "\n";
    return kExitIntegrationError;
  }
  const double limit = 1e-4;
  const bool pass = cmp.max_rel_dev < limit;
  if (!quiet || !pass)
    std::cout << "oracle-check: max relative n_ph deviation = "
              << cmp.max_rel_dev << " at t = " << cmp.t_at_max << " s over "
              << cmp.compared << " samples (limit " << limit << ") -> "
              << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : kExitOracleMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "qbmaser: dissipation-modulated pentacene maser battery simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  unsigned workers = 1;
  bool quiet = false;
  app.add_option("--config", config_path, "run configuration JSON")
      ->envname("QBMASER_CONFIG");
  app.add_option("--set", overrides,
                 "dotted-path override, e.g. schedule.termination.fixed=440e-9")
      ->allow_extra_args(false);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* sim = app.add_subcommand("simulate", "run one protocol simulation");
  sim->fallthrough();
  std::string scheme_override;
  sim->add_option("--scheme", scheme_override,
                  "override the dissipation scheme "
                  "(instantaneous|linear|sinusoidal)");

  auto* swp = app.add_subcommand("sweep", "run a parameter sweep");
  swp->fallthrough();
  std::string spec_path;
  std::string preset;
  swp->add_option("spec", spec_path, "sweep spec JSON");
  swp->add_option("--preset", preset,
                  "named sweep template (fig4-tau2|fig4-kappa|fig5|fig6)");

  auto* orc = app.add_subcommand(
      "oracle-check", "compare the adaptive integrator against the fixed-step "
                      "reference over the first pulse");
  orc->fallthrough();
  double oracle_dt = 1e-12;
  orc->add_option("--dt", oracle_dt, "reference step size in seconds")
      ->check(CLI::PositiveNumber);
  std::string oracle_scheme;
  orc->add_option("--scheme", oracle_scheme, "override the dissipation scheme");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      if (config_path.empty()) {
        std::cerr << "config error: --config is required\n";
        return kExitConfigError;
      }
      return run_simulate(config_path, overrides, scheme_override, out_dir,
                          quiet);
    }
    if (swp->parsed())
      return run_sweep_cmd(spec_path, preset, overrides, out_dir, workers,
                           quiet);
    if (orc->parsed()) {
      if (config_path.empty()) {
        std::cerr << "config error: --config is required\n";
        return kExitConfigError;
      }
      return run_oracle_check(config_path, overrides, oracle_scheme, oracle_dt,
                              quiet);
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIntegrationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}
