#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evfleet/fleet.hpp"
#include "evfleet/scenario.hpp"
#include "evfleet/simulation.hpp"

namespace evfleet {

struct SweepRow {
  double value = 0.0;
  RunResult result;
};

/// One independent run per value with `key` overridden. Demand is drawn
/// from the same seed in every run. Parallel mode runs one engine per
/// thread; rows come back in `values` order either way.
std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const std::string& key,
                                std::span<const double> values,
                                Execution exec = Execution::Parallel);

std::string sweep_csv_header();
std::string format_sweep_row(const SweepRow& row);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace evfleet
