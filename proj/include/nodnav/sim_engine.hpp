#pragma once

// Episode loop: opinion epochs, roadmap queries, MPC ticks and outcome
// detection, plus seeded batches and heatmap sweeps.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodnav/environment.hpp"
#include "nodnav/mpc.hpp"
#include "nodnav/nod_core.hpp"
#include "nodnav/planner.hpp"
#include "nodnav/strategy_game.hpp"

namespace nodnav::sim {

inline constexpr int kTraceSchema = 1;
inline constexpr int kCsvSchema = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class InitialOpinions { Zero, DistanceBased, Explicit };

struct Scenario {
  std::string name;
  std::string label;
  std::vector<Vec2> origins;
  std::vector<Vec2> destinations;
  InitialOpinions initial = InitialOpinions::Zero;
  std::vector<std::vector<double>> opinions;  // explicit z(0), one row per robot
  std::vector<std::vector<double>> biases;    // one row per robot; empty means zero
  int k = -1;                                 // game-player capacity; negative means N_r - 1

  int robots() const { return static_cast<int>(origins.size()); }
  int capacity() const { return k < 0 ? robots() - 1 : k; }
  /// Throws ConfigError naming the offending field.
  void validate(const Environment& env) const;
};

struct SimConfig {
  double dt = 0.1;
  double T = 1.0;
  double T_f = 120.0;
  double success_epsilon = 0.2;
  std::uint64_t seed = 1;
  nod::NodParams nod;
  nod::MaskedTermMode masked = nod::MaskedTermMode::Omit;
  double K1 = 5.0;
  double K2 = 10.0;
  bool k2_outside = false;
  game::ConflictParams conflict;
  planner::PlannerParams planner;
  mpc::MpcParams mpc;
  int threads = 0;  // batch workers; 0 means hardware concurrency

  void validate() const;
  /// "key=value" lines in field order, without seed and threads; the basis of the provenance hash.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Calls f(name, field) for every configurable field. Field types are
/// double, int, bool, std::uint64_t, std::vector<std::size_t> and MaskedTermMode.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("sim.dt", c.dt);
  f("sim.T", c.T);
  f("sim.T_f", c.T_f);
  f("sim.success_epsilon", c.success_epsilon);
  f("sim.seed", c.seed);
  f("sim.threads", c.threads);
  f("nod.d", c.nod.d);
  f("nod.u", c.nod.u);
  f("nod.eta", c.nod.eta);
  f("nod.h", c.nod.h);
  f("nod.masked_terms", c.masked);
  f("nod.K1", c.K1);
  f("nod.K2", c.K2);
  f("nod.k2_outside", c.k2_outside);
  f("conflict.delta", c.conflict.delta);
  f("planner.budgets", c.planner.budgets);
  f("planner.w1", c.planner.w1);
  f("planner.varsigma", c.planner.varsigma);
  f("planner.seed", c.planner.seed);
  f("planner.corridor_sample_fraction", c.planner.corridor_sample_fraction);
  f("planner.connect_k", c.planner.connect_k);
  f("mpc.horizon", c.mpc.horizon);
  f("mpc.w2", c.mpc.w2);
  f("mpc.n_ctrl", c.mpc.n_ctrl);
  f("mpc.collision_samples", c.mpc.collision_samples);
  f("mpc.quadrature_intervals", c.mpc.quadrature_intervals);
  f("mpc.separation_margin", c.mpc.separation_margin);
  f("mpc.clearance_margin", c.mpc.clearance_margin);
  f("mpc.speed_margin", c.mpc.speed_margin);
}

std::string to_string(nod::MaskedTermMode mode);
nod::MaskedTermMode parse_masked_mode(const std::string& name);

enum class Outcome { Success, DeadlockTimeout, Collision };
std::string to_string(Outcome o);

struct TickRecord {
  int step = 0;
  double t = 0.0;
  std::vector<RobotState> states;   // v is the velocity applied over the previous tick
  std::vector<std::uint8_t> held;   // step refused or MPC infeasible on the previous tick
};

struct RobotEpoch {
  std::vector<double> z;
  std::vector<double> x;
  int strategy = 0;               // 0-based global index
  std::vector<int> players;
  bool plan_failed = false;       // selected strategy had no roadmap path
  bool done = false;
};

struct EpochRecord {
  int epoch = 0;
  double t = 0.0;
  std::vector<RobotEpoch> robots;
};

struct OutcomeRecord {
  Outcome outcome = Outcome::DeadlockTimeout;
  double t = 0.0;
  int consensus = -1;                // 0-based global strategy index, -1 when undetermined
  bool consensus_from_entry = false; // false when read from the realized crossing order
  std::vector<int> crossing_order;   // robots by corridor entry time
  double min_separation = 0.0;
  int infeasible_ticks = 0;
};

struct Trace {
  std::string scenario;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double dt = 0.1;
  double T = 1.0;
  std::vector<Vec2> destinations;
  std::vector<std::string> strategies;
  std::vector<TickRecord> ticks;
  std::vector<EpochRecord> epochs;
  OutcomeRecord outcome;
};

/// Newline-delimited JSON: header, then tick and epoch records in time order, then the outcome.
void write_trace(const Trace& trace, std::ostream& out);

/// Collision when some pair is closer than 2 r (1 - 1e-6); success when every
/// robot is within success_epsilon of its destination; deadlock at T_f.
std::optional<Outcome> detect_outcome(std::span<const RobotState> states,
                                      std::span<const Vec2> destinations, double t,
                                      const SimConfig& config, const Environment& env);

/// Opinions at t = 0 for every robot.
std::vector<std::vector<double>> initial_opinions(const Scenario& scenario, const SimConfig& config,
                                                  const Environment& env);

/// One episode with config.seed. Roadmaps come from the shared store.
Trace run_episode(const Scenario& scenario, const SimConfig& config, planner::RoadmapStore& store);

struct BatchResult {
  int trials = 0;
  int successes = 0;
  std::vector<int> strategy_counts;  // consensus strategy of successful episodes
  double mean_time = 0.0;            // over successful episodes; NaN when none
  std::vector<OutcomeRecord> outcomes;

  double success_rate() const { return trials ? 100.0 * successes / trials : 0.0; }
  double frequency(std::size_t s) const {
    return trials ? 100.0 * strategy_counts[s] / trials : 0.0;
  }
};

using TraceSink = std::function<void(int trial, const Trace&)>;

/// Trials use seeds config.seed + i and run on a worker pool.
BatchResult run_batch(const Scenario& scenario, const SimConfig& config, int trials,
                      planner::RoadmapStore& store, const TraceSink& sink = {});

struct HeatmapCell {
  double z11 = 0.0;
  double z21 = 0.0;
  double x11 = 0.0;
  double x21 = 0.0;
};

struct HeatmapGrid {
  double z_min = -10.0;
  double z_max = 10.0;
  int resolution = 21;
  double value(int i) const {
    return resolution == 1 ? z_min : z_min + (z_max - z_min) * i / (resolution - 1);
  }
};

/// Steady-state strategy-1 probabilities of the continuous dynamics from
/// z_i(0) = (z_i1, 0), two robots, all-to-all.
std::vector<HeatmapCell> heatmap_direct(const nod::NodParams& params, const HeatmapGrid& grid);

/// Fraction of episodes per cell whose consensus strategy is S_1, on a two-robot scenario.
std::vector<HeatmapCell> heatmap_framework(const Scenario& scenario, const SimConfig& config,
                                           const HeatmapGrid& grid, int trials,
                                           planner::RoadmapStore& store);

}  // namespace nodnav::sim
