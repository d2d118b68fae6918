#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "nodnav/io.hpp"
#include "nodnav/sim_engine.hpp"

namespace nodnav::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCacheEnv = "NODNAV_CACHE_DIR";

struct Options {
  std::vector<std::string> scenarios;
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int trials = 40;
  std::optional<int> k;
  std::vector<std::string> overrides;
  std::string cache_dir;
  bool traces = false;
  bool no_build = false;
  std::string mode = "direct";
  int resolution = 21;
  double z_max = 10.0;
  std::vector<std::string> reports;
};

sim::SimConfig make_config(const Options& o) {
  sim::SimConfig c = o.config.empty() ? sim::SimConfig{} : io::load_config(o.config);
  for (const auto& a : o.overrides) io::apply_override(c, a);
  if (o.seed) c.seed = *o.seed;
  return c;
}

sim::Scenario make_scenario(const Options& o, const std::string& path) {
  sim::Scenario s = io::load_scenario(path);
  if (o.k) {
    if (*o.k < 0) throw sim::ConfigError("--k: must be nonnegative");
    s.k = *o.k;
  }
  return s;
}

std::optional<fs::path> cache_dir(const Options& o) {
  if (!o.cache_dir.empty()) return fs::path(o.cache_dir);
  if (const char* env = std::getenv(kCacheEnv); env && *env) return fs::path(env);
  return fs::path(".nodnav_cache");
}

planner::RoadmapStore make_store(const Options& o, const sim::SimConfig& c) {
  auto dir = cache_dir(o);
  fs::create_directories(*dir);
  return planner::RoadmapStore(Environment::corridor_world(), c.planner, dir, !o.no_build);
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string tag(const sim::Scenario& s) { return s.name + "_k" + std::to_string(s.capacity()); }

int cmd_run(const Options& o, std::ostream& out) {
  const auto config = make_config(o);
  const auto scenario = make_scenario(o, o.scenarios.at(0));
  auto store = make_store(o, config);
  const sim::Trace trace = sim::run_episode(scenario, config, store);
  const fs::path file = out_dir(o) / (tag(scenario) + "_seed" + std::to_string(config.seed) + ".ndjson");
  std::ofstream f(file, std::ios::binary);
  sim::write_trace(trace, f);
  if (!f) throw std::runtime_error("cannot write " + file.string());
  const auto& r = trace.outcome;
  out << scenario.name << " seed=" << config.seed << " outcome=" << sim::to_string(r.outcome)
      << " t=" << r.t;
  if (r.consensus >= 0) out << " strategy=S" << r.consensus + 1 << " " << trace.strategies[r.consensus];
  out << " min_separation=" << r.min_separation << "\ntrace: " << file.string() << '\n';
  return 0;
}

int cmd_batch(const Options& o, std::ostream& out) {
  const auto config = make_config(o);
  if (o.trials <= 0) throw sim::ConfigError("--trials: must be positive");
  const fs::path dir = out_dir(o);
  std::vector<io::AggregateRow> rows;
  for (const auto& path : o.scenarios) {
    const auto scenario = make_scenario(o, path);
    auto store = make_store(o, config);
    sim::TraceSink sink;
    if (o.traces) {
      fs::create_directories(dir / "traces");
      sink = [&](int trial, const sim::Trace& trace) {
        const auto file = dir / "traces" /
                          (tag(scenario) + "_seed" + std::to_string(config.seed + trial) + ".ndjson");
        std::ofstream f(file, std::ios::binary);
        sim::write_trace(trace, f);
        if (!f) throw std::runtime_error("cannot write " + file.string());
      };
    }
    const auto result = sim::run_batch(scenario, config, o.trials, store, sink);
    const auto row = io::aggregate_row(scenario, result);
    std::ostringstream csv;
    io::write_aggregate_csv(csv, {row}, io::provenance(config, "scenario=" + scenario.name));
    write_file(dir / (tag(scenario) + ".csv"), csv.str());
    rows.push_back(row);
  }
  out << io::format_table(rows);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto config = make_config(o);
  sim::HeatmapGrid grid{-o.z_max, o.z_max, o.resolution};
  if (grid.resolution < 1) throw sim::ConfigError("--resolution: must be positive");
  std::vector<sim::HeatmapCell> cells;
  std::string extra = "mode=" + o.mode;
  if (o.mode == "direct") {
    if (!o.scenarios.empty() && make_scenario(o, o.scenarios[0]).robots() != 2)
      throw sim::ConfigError("sweep: scenario must have two robots");
    cells = sim::heatmap_direct(config.nod, grid);
  } else if (o.mode == "framework") {
    if (o.scenarios.empty()) throw sim::ConfigError("sweep: framework mode needs --scenario");
    const auto scenario = make_scenario(o, o.scenarios[0]);
    if (scenario.robots() != 2) throw sim::ConfigError("sweep: scenario must have two robots");
    auto store = make_store(o, config);
    cells = sim::heatmap_framework(scenario, config, grid, o.trials, store);
    extra += " scenario=" + scenario.name + " trials=" + std::to_string(o.trials);
  } else {
    throw sim::ConfigError("--mode: expected direct or framework");
  }
  std::ostringstream csv;
  io::write_sweep_csv(csv, cells, io::provenance(config, extra));
  const fs::path file = out_dir(o) / ("sweep_" + o.mode + ".csv");
  write_file(file, csv.str());
  out << cells.size() << " cells: " << file.string() << '\n';
  return 0;
}

int cmd_build_cache(const Options& o, std::ostream& out) {
  const auto config = make_config(o);
  auto store = make_store(o, config);
  std::set<int> sizes;
  for (const auto& path : o.scenarios) {
    const auto s = make_scenario(o, path);
    // Group sizes in use: the robot itself plus up to k players.
    if (o.k) sizes.insert(std::min(*o.k, s.robots() - 1) + 1);
    else for (int n = 1; n <= s.robots(); ++n) sizes.insert(n);
  }
  for (int n : sizes) {
    const int built = store.prepare(n);
    out << "group size " << n << ": " << built << " built, "
        << game::enumerate_strategies(n).size() - built << " cached\n";
  }
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  std::vector<io::AggregateRow> rows;
  for (const auto& path : o.reports) {
    std::ifstream f(path);
    if (!f) throw sim::ConfigError(path + ": cannot open");
    for (auto& r : io::read_aggregate_csv(f)) rows.push_back(std::move(r));
  }
  out << io::format_table(rows);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Opinion-driven multi-robot corridor navigation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c, bool scenario_required) {
    auto* s = c->add_option("--scenario", o.scenarios, "Scenario file (repeatable)");
    if (scenario_required) s->required();
    c->add_option("--config", o.config, "Configuration file")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "Base seed; trial i uses seed + i");
    c->add_option("--override", o.overrides, "key=value, repeatable");
    c->add_option("--cache-dir", o.cache_dir, std::string("Roadmap cache (env ") + kCacheEnv + ")");
    c->add_flag("--no-build", o.no_build, "Fail instead of building missing roadmaps");
    c->add_option("--k", o.k, "Game-player capacity");
  };

  auto* run_cmd = app.add_subcommand("run", "One episode, trace written to --out");
  common(run_cmd, true);
  run_cmd->add_option("--out", o.out, "Output directory");

  auto* batch = app.add_subcommand("batch", "Seeded trials, aggregate CSV per scenario");
  common(batch, true);
  batch->add_option("--out", o.out, "Output directory");
  batch->add_option("--trials", o.trials, "Trials per scenario");
  batch->add_flag("--traces,!--no-traces", o.traces, "Write one trace per episode");

  auto* sweep = app.add_subcommand("sweep", "Initial-opinion heatmap grid");
  common(sweep, false);
  sweep->add_option("--out", o.out, "Output directory");
  sweep->add_option("--mode", o.mode, "direct or framework")->check(CLI::IsMember({"direct", "framework"}));
  sweep->add_option("--trials", o.trials, "Episodes per cell (framework)");
  sweep->add_option("--resolution", o.resolution, "Cells per axis");
  sweep->add_option("--z-max", o.z_max, "Grid spans [-z, z]");

  auto* build = app.add_subcommand("build-cache", "Precompute roadmaps for the scenarios");
  common(build, true);

  auto* report = app.add_subcommand("report", "Percentage table from aggregate CSVs");
  report->add_option("csv", o.reports, "Aggregate CSV files")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (run_cmd->parsed()) return cmd_run(o, out);
    if (batch->parsed()) return cmd_batch(o, out);
    if (sweep->parsed()) {
      if (sweep->count("--trials") == 0) o.trials = 10;
      return cmd_sweep(o, out);
    }
    if (build->parsed()) return cmd_build_cache(o, out);
    return cmd_report(o, out);
  } catch (const sim::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nodnav::cli
