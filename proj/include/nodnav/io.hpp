#pragma once

// Scenario and configuration files (YAML), dotted-key overrides, and the
// aggregate / sweep CSV formats.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nodnav/sim_engine.hpp"

namespace nodnav::io {

inline constexpr int kFileSchema = 1;

/// Throws sim::ConfigError naming the offending field.
sim::Scenario load_scenario(const std::filesystem::path& path);
sim::Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

/// Missing keys keep their defaults; unknown keys are errors.
sim::SimConfig load_config(const std::filesystem::path& path);
sim::SimConfig parse_config(const std::string& text, const std::string& source = "<string>");

/// "section.key=value" applied to an existing field.
void apply_override(sim::SimConfig& config, const std::string& assignment);

/// "# schema=1 config_hash=... seed=..." provenance line.
std::string provenance(const sim::SimConfig& config, const std::string& extra = "");

struct AggregateRow {
  std::string scenario;
  int k = 0;
  int trials = 0;
  double success_rate = 0.0;
  std::vector<double> frequencies;  // percent per strategy
  double mean_time = 0.0;           // NaN when no episode succeeded
};

AggregateRow aggregate_row(const sim::Scenario& scenario, const sim::BatchResult& result);

/// Provenance line, header, one line per row. All rows must share a strategy count.
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         const std::string& provenance_line);
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);

void write_sweep_csv(std::ostream& out, const std::vector<sim::HeatmapCell>& cells,
                     const std::string& provenance_line);

/// Percentage table, one row per scenario and one column per strategy.
std::string format_table(const std::vector<AggregateRow>& rows);

}  // namespace nodnav::io
