#include "evfleet/sweep.hpp"

#include <exception>
#include <fstream>

#include <fmt/format.h>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {

SweepRow run_one(const ScenarioConfig& base, const std::string& key, double value) {
  ScenarioConfig cfg = base;
  apply_override(cfg, key, value);
  SimulationOptions opts;
  opts.schedule_exec = Execution::Serial;
  Simulation sim(std::move(cfg), opts);
  return SweepRow{value, sim.run()};
}

}  // namespace

std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const std::string& key,
                                std::span<const double> values, Execution exec) {
  // Reject bad keys and values before any run starts.
  for (double v : values) {
    ScenarioConfig probe = base;
    apply_override(probe, key, v);
  }
  std::vector<SweepRow> rows(values.size());
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < values.size(); ++i) rows[i] = run_one(base, key, values[i]);
    return rows;
  }
  std::vector<std::exception_ptr> errors(values.size());
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      rows[k] = run_one(base, key, values[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::string sweep_csv_header() {
  return "value,min_idle,mean_wait_s,n_stranded,n_delayed,total_grid_wh,total_fuel_l\n";
}

std::string format_sweep_row(const SweepRow& row) {
  const RunResult& r = row.result;
  return fmt::format("{},{},{:.3f},{},{},{:.6f},{:.9f}\n", row.value, r.min_idle, r.mean_wait_s,
                     r.n_stranded, r.n_delayed, r.total_grid_wh, r.total_fuel_l);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {}", path.string()));
  out << sweep_csv_header();
  for (const auto& r : rows) out << format_sweep_row(r);
  out.close();
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

}  // namespace evfleet
