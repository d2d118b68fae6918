#pragma once

// Joint-space probabilistic roadmaps conditioned on a corridor passing order,
// path queries over them, and time parameterization of the result.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nodnav/environment.hpp"
#include "nodnav/geometry.hpp"

namespace nodnav::planner {

using JointConfiguration = std::vector<Vec2>;

class PlanningFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlannerParams {
  std::vector<std::size_t> budgets{1000, 5000, 20000, 50000};  // indexed by robot count - 1
  double w1 = 0.4;
  double varsigma = 0.1;
  std::uint64_t seed = 1;
  double corridor_sample_fraction = 0.35;
  int connect_k = 24;  // start/goal connection attempts per phase

  std::size_t budget_for(int n_robots) const;
};

/// All pairwise distances >= 2 r and every disk free of obstacles.
bool validity_check(std::span<const Vec2> x, const Environment& env);

/// Sum over pairs of 1 / max(|p_i - p_j| - 2 r, varsigma).
double proximity_penalty(std::span<const Vec2> x, double robot_radius, double varsigma);

/// Joint-space length plus w1 times the proximity penalty at every waypoint.
double path_cost(const std::vector<JointConfiguration>& waypoints, double w1, double varsigma,
                 double robot_radius);

/// Result of densely checking a straight joint segment.
struct SegmentCheck {
  bool valid = false;
  std::uint32_t occupants = 0;  // bit s set when slot s is inside the corridor somewhere
};

/// Checks points at spacing <= r/2 of the largest per-robot displacement; `a` is assumed checked.
SegmentCheck check_segment(std::span<const Vec2> a, std::span<const Vec2> b,
                           const Environment& env);

/// Roadmap over the joint space of `n` robots. Slots are the planned robots
/// sorted by index; `order` is the passing order over slots. Each node and
/// edge carries the single slot allowed inside the corridor (-1 for none), so
/// phase m of the order admits exactly the elements labelled -1 or order[m].
struct Roadmap {
  int n = 0;
  std::vector<int> order;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  std::uint64_t env_hash = 0;

  std::vector<double> coords;         // node-major, 2n values per node
  std::vector<std::int8_t> label;     // per node
  std::vector<double> penalty;        // proximity penalty per node
  std::vector<std::uint32_t> offsets; // CSR row starts, size nodes + 1
  std::vector<std::uint32_t> targets;
  std::vector<double> lengths;
  std::vector<std::int8_t> edge_label;

  std::size_t size() const { return label.size(); }
  std::span<const double> node(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(2 * n), static_cast<std::size_t>(2 * n)};
  }
  JointConfiguration configuration(std::size_t i) const;
  std::size_t edge_count() const { return targets.size(); }
};

/// PRM* with k-nearest connection capped by the radius rule. Deterministic in `seed`.
Roadmap build_roadmap(const Environment& env, std::span<const int> order, int n_robots,
                      std::size_t sample_budget, std::uint64_t seed, const PlannerParams& params);

/// Lowest-cost waypoint sequence from start to goal respecting the passing
/// order; empty optional when the roadmap cannot connect them.
std::optional<std::vector<JointConfiguration>> query_path(const Roadmap& roadmap,
                                                          const JointConfiguration& start,
                                                          const JointConfiguration& goal,
                                                          const Environment& env,
                                                          const PlannerParams& params);

/// Piecewise-linear, speed-limited joint trajectory. Time is absolute.
struct JointPath {
  double t0 = 0.0;
  std::vector<double> times;                 // one per waypoint, times[0] == t0
  std::vector<JointConfiguration> waypoints;

  std::size_t robots() const { return waypoints.empty() ? 0 : waypoints.front().size(); }
  double end_time() const { return times.empty() ? t0 : times.back(); }
  /// Position and segment velocity of `slot` at t; held before t0 and after the end.
  RobotState state(std::size_t slot, double t) const;
  /// Samples of one slot at t0, t0 + dt, ..., up to t_end inclusive.
  std::vector<RobotState> sample(std::size_t slot, double t_begin, double t_end, double dt) const;
};

/// Segment duration is the largest per-robot displacement divided by v_max.
JointPath interpolate(const std::vector<JointConfiguration>& waypoints, double v_max, double t0);

/// Constant path at `x`.
JointPath hold_path(const JointConfiguration& x, double t0);

/// Time at which `slot` first enters and last leaves the corridor along the
/// path, evaluated on a grid of step dt; nullopt if it never enters.
struct CrossingTimes {
  double entry = 0.0;
  double exit = 0.0;
};
std::optional<CrossingTimes> crossing_times(const JointPath& path, std::size_t slot,
                                            const Environment& env, double dt);

/// Thread-safe lazily built set of roadmaps, one per (robot count, order),
/// optionally persisted in a binary cache directory.
class RoadmapStore {
 public:
  RoadmapStore(Environment env, PlannerParams params, std::optional<std::filesystem::path> cache_dir,
               bool allow_build = true);

  const Roadmap& get(int n_robots, std::span<const int> order);
  /// Builds (or loads) every order for n_robots; returns how many were built fresh.
  int prepare(int n_robots);

  const Environment& environment() const { return env_; }
  const PlannerParams& params() const { return params_; }

  std::filesystem::path cache_file(int n_robots, std::span<const int> order) const;
  std::uint64_t seed_for(int n_robots, std::span<const int> order) const;

 private:
  struct Entry {
    std::once_flag once;
    std::unique_ptr<Roadmap> roadmap;
    bool built_fresh = false;
  };
  Entry& entry(int n_robots, std::span<const int> order);
  void fill(Entry& e, int n_robots, std::span<const int> order);

  Environment env_;
  PlannerParams params_;
  std::optional<std::filesystem::path> cache_dir_;
  bool allow_build_;
  std::mutex mutex_;
  std::map<std::vector<int>, std::unique_ptr<Entry>> entries_;
};

void save_roadmap(const Roadmap& roadmap, const std::filesystem::path& path);
/// Throws std::runtime_error on a malformed or truncated file.
Roadmap load_roadmap(const std::filesystem::path& path);

}  // namespace nodnav::planner
