// Command-line runner: validate a scenario, run it, or sweep one parameter.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "evfleet/errors.hpp"
#include "evfleet/scenario.hpp"
#include "evfleet/simulation.hpp"
#include "evfleet/sweep.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kModel = 2, kIo = 3 };

int cmd_validate(const std::string& path) {
  const evfleet::ValidationReport report = evfleet::validate_config(path);
  if (!report.ok) {
    for (const auto& e : report.errors) spdlog::error("{}", e);
    return kConfig;
  }
  std::cout << report.effective.dump(2) << "\n";
  spdlog::info("{}: OK", path);
  return kOk;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out,
            bool event_log, bool traces) {
  evfleet::ScenarioConfig cfg = evfleet::load_config(path);
  if (seed) cfg.seed = *seed;
  spdlog::info("running {} (fleet {}, horizon {} s, seed {})", path, cfg.fleet_size,
               cfg.horizon_s, cfg.seed);
  const auto run = evfleet::run_scenario(cfg, out, {event_log, traces});
  const auto& r = run.result;
  spdlog::info("{} events, {} trips ({} rejected, {} completed, {} delayed), {} stranded",
               r.engine.dispatched, r.n_trips, r.n_rejected, r.n_completed, r.n_delayed,
               r.n_stranded);
  spdlog::info("min idle {}, mean wait {:.1f} s, grid {:.1f} Wh, fuel {:.3f} l", r.min_idle,
               r.mean_wait_s, r.total_grid_wh, r.total_fuel_l);
  for (const auto& f : run.manifest.files) spdlog::info("  {} ({} rows)", f.name, f.rows);
  spdlog::info("wrote {} in {:.2f} s", out, run.manifest.wall_clock_s);
  return kOk;
}

int cmd_sweep(const std::string& path, const std::string& key, const std::vector<double>& values,
              std::optional<std::uint64_t> seed, const std::string& out, bool serial) {
  evfleet::ScenarioConfig cfg = evfleet::load_config(path);
  if (seed) cfg.seed = *seed;
  const auto rows = evfleet::run_sweep(
      cfg, key, values, serial ? evfleet::Execution::Serial : evfleet::Execution::Parallel);
  std::filesystem::create_directories(out);
  const auto file = std::filesystem::path(out) / "sweep.csv";
  evfleet::write_sweep_csv(file, rows);
  std::cout << evfleet::sweep_csv_header();
  for (const auto& row : rows) std::cout << evfleet::format_sweep_row(row);
  spdlog::info("wrote {}", file.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("evfleet");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Electric fleet discrete-event simulator"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";

  auto* validate = app.add_subcommand("validate", "Check a scenario and print the effective config");
  validate->add_option("config", config, "Scenario JSON")->required();

  bool event_log = false;
  bool traces = false;
  auto* run = app.add_subcommand("run", "Run one scenario and write CSV outputs");
  run->add_option("config", config, "Scenario JSON")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_flag("--event-log", event_log, "Also write events.csv");
  run->add_flag("--traces", traces, "Also write per-step drive traces (large)");

  std::string key;
  std::vector<double> values;
  bool serial = false;
  auto* sweep = app.add_subcommand("sweep", "Run once per value of one parameter");
  sweep->add_option("config", config, "Scenario JSON")->required();
  sweep->add_option("--param", key, "fleet.size | stations.count | stations.slot_power_w | "
                                    "stations.max_simultaneous")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seed", seed, "Override the master seed");
  sweep->add_option("--out", out, "Output directory")->capture_default_str();
  sweep->add_flag("--serial", serial, "Run the values one after another");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(config);
    if (*run) return cmd_run(config, seed, out, event_log, traces);
    if (*sweep) return cmd_sweep(config, key, values, seed, out, serial);
  } catch (const evfleet::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const evfleet::IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIo;
  } catch (const evfleet::ModelError& e) {
    spdlog::error("model error: {}", e.what());
    return kModel;
  } catch (const std::exception& e) {
    spdlog::error("model error: {}", e.what());
    return kModel;
  }
  return kOk;
}
