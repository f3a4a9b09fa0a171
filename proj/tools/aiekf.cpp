// aiekf: scenario generation, log replay and evaluation.
//
//   aiekf gen   --scenario s.cfg --out DIR
//   aiekf run   --scenario DIR|s.cfg [--variant V]... [--out DIR] [--traces]
//   aiekf sweep --scenario DIR|s.cfg --variant V [--grid a,b,c] [--out DIR]
//   aiekf table --scenario s.cfg [--out DIR]
//
// Exit status: 0 ok, 1 config or input error, 2 numerical fault.

#include "ainekf/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace ainekf;
using namespace ainekf::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

constexpr const char* kSensorFile = "sensors.log";
constexpr const char* kTruthFile = "truth.log";
constexpr const char* kScenarioFile = "scenario.cfg";

struct Common {
  std::string scenario;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

/// Scenario config (or the one saved next to a log directory), then the
/// filter config, then --seed.
Config resolve_config(const Common& c, bool& from_logs) {
  Config cfg;
  from_logs = false;
  if (!c.scenario.empty()) {
    fs::path p(c.scenario);
    if (fs::is_directory(p)) {
      from_logs = true;
      if (fs::exists(p / kScenarioFile)) load_config_file(p / kScenarioFile, cfg);
    } else {
      load_config_file(p, cfg);
    }
  }
  if (!c.config.empty()) load_config_file(c.config, cfg);
  if (c.seed) {
    cfg.scenario.seed = *c.seed;
    cfg.scenario.validate();
  }
  return cfg;
}

sim::Streams load_streams(const Common& c, const Config& cfg, bool from_logs) {
  if (from_logs) {
    if (c.seed) {
      std::cerr << "aiekf: --seed has no effect when replaying recorded logs\n";
    }
    const fs::path dir(c.scenario);
    return sim::read_logs(dir / kSensorFile, dir / kTruthFile);
  }
  return sim::generate(cfg.scenario);
}

/// Writes to DIR/name, or stdout when no --out was given.
void emit(const Common& c, const std::string& name, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / name;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  std::cerr << "aiekf: wrote " << path.string() << "\n";
}

std::string scenario_label(const Config& cfg) {
  return std::string(to_string(cfg.scenario.gait)) + " " +
         std::string(sim::to_string(cfg.scenario.terrain)) + " seed=" +
         std::to_string(cfg.scenario.seed);
}

void add_common(CLI::App* app, Common& c, bool scenario_required) {
  auto* s = app->add_option("--scenario", c.scenario,
                            "scenario config file, or a directory written by 'gen'");
  if (scenario_required) s->required();
  app->add_option("--config", c.config, "filter/harness config file (key = value)");
  app->add_option("--seed", c.seed, "override the scenario seed");
  app->add_option("--out", c.out, "output directory");
}

int cmd_gen(const Common& c) {
  if (c.out.empty()) throw ConfigError("gen", 0, "--out is required");
  bool from_logs = false;
  const Config cfg = resolve_config(c, from_logs);
  if (from_logs) throw ConfigError("gen", 0, "--scenario must be a config file");
  const sim::Streams streams = sim::generate(cfg.scenario);
  const fs::path dir(c.out);
  sim::write_sensor_log(streams, dir / kSensorFile);
  sim::write_truth_log(streams, dir / kTruthFile);
  std::ofstream(dir / kScenarioFile) << "# resolved by aiekf gen\n" << dump_config(cfg);
  std::cerr << "aiekf: " << streams.sensors.size() << " ticks -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_run(const Common& c, const std::vector<std::string>& names, bool traces, bool calibrate) {
  bool from_logs = false;
  const Config cfg = resolve_config(c, from_logs);
  const sim::Streams streams = load_streams(c, cfg, from_logs);

  if (calibrate) {
    const Vec3 w = calibrate_velocity_noise(streams, cfg);
    char buf[128];
    std::snprintf(buf, sizeof buf, "velocity_kinematic_noise = %.6g, %.6g, %.6g\n", w.x(), w.y(),
                  w.z());
    emit(c, "calibration.cfg", buf);
    return kExitOk;
  }

  std::vector<Variant> variants;
  for (const auto& n : names) variants.push_back(parse_variant(n));
  if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());

  EvalReport report;
  if (traces) {
    if (c.out.empty()) throw ConfigError("run", 0, "--traces needs --out");
    std::sort(variants.begin(), variants.end());
    variants.erase(std::unique(variants.begin(), variants.end()), variants.end());
    report.scenario = scenario_label(cfg);
    report.burn_in = cfg.harness.burn_in;
    for (Variant v : variants) {
      TraceWriter writer(c.out, v, cfg.harness.noise.alpha_max);
      report.runs.push_back(run_variant(streams, v, cfg, std::ref(writer)));
    }
  } else {
    report = run_eval(streams, variants, cfg, scenario_label(cfg));
  }
  std::ostringstream text;
  write_report(report, text);
  emit(c, "report.csv", text.str());
  return any_diverged(report) ? kExitNumerical : kExitOk;
}

int cmd_sweep(const Common& c, const std::string& variant, const std::vector<double>& grid) {
  bool from_logs = false;
  const Config cfg = resolve_config(c, from_logs);
  const Variant v = parse_variant(variant);
  for (double w : grid) {
    if (!(w > 0.0)) throw ConfigError("sweep", 0, "grid values must be > 0");
  }
  const sim::Streams streams = load_streams(c, cfg, from_logs);
  const auto rows = noise_sweep(streams, grid, v, cfg);
  std::ostringstream text;
  write_sweep(rows, v, text);
  emit(c, "sweep.csv", text.str());
  for (const auto& r : rows) {
    if (r.result.diverged) return kExitNumerical;
  }
  return kExitOk;
}

int cmd_table(const Common& c) {
  bool from_logs = false;
  const Config cfg = resolve_config(c, from_logs);
  if (from_logs) throw ConfigError("table", 0, "--scenario must be a config file");
  const auto rows = table(cfg);
  std::ostringstream text;
  write_table(rows, text);
  emit(c, "table.csv", text.str());
  for (const auto& r : rows) {
    if (r.result.diverged) return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive invariant EKF harness"};
  app.require_subcommand(1);

  Common gen_opts, run_opts, sweep_opts, table_opts;
  std::vector<std::string> run_variants;
  bool run_traces = false;
  bool run_calibrate = false;
  std::string sweep_variant = "IEKF+SR+FE";
  std::vector<double> sweep_grid = {0.002, 0.02, 0.2};

  auto* gen = app.add_subcommand("gen", "generate sensor and truth logs");
  add_common(gen, gen_opts, true);

  auto* run = app.add_subcommand("run", "replay logs through filter variants");
  add_common(run, run_opts, false);
  run->add_option("--variant", run_variants, "IEKF, IEKF+SR, IEKF+FE or IEKF+SR+FE (repeatable)");
  run->add_flag("--traces", run_traces, "write per-leg trace CSVs to --out");
  run->add_flag("--calibrate-qv", run_calibrate,
                "estimate velocity_kinematic_noise from a standstill log");

  auto* sweep = app.add_subcommand("sweep", "foot-noise sweep");
  add_common(sweep, sweep_opts, false);
  sweep->add_option("--variant", sweep_variant, "filter variant");
  sweep->add_option("--grid", sweep_grid, "foot noise values w_f")->delimiter(',');

  auto* tbl = app.add_subcommand("table", "gait x terrain x variant matrix");
  add_common(tbl, table_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_opts);
    if (run->parsed()) return cmd_run(run_opts, run_variants, run_traces, run_calibrate);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_variant, sweep_grid);
    if (tbl->parsed()) return cmd_table(table_opts);
  } catch (const ConfigError& e) {
    std::cerr << "aiekf: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sim::LogError& e) {
    std::cerr << "aiekf: log error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "aiekf: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "aiekf: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
