#include "nodnav/planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "kdtree.hpp"
#include "nodnav/nod_core.hpp"

namespace nodnav::planner {

std::size_t PlannerParams::budget_for(int n_robots) const {
  if (n_robots < 1 || static_cast<std::size_t>(n_robots) > budgets.size())
    throw std::out_of_range("planner: no sample budget for " + std::to_string(n_robots) +
                            " robots");
  return budgets[static_cast<std::size_t>(n_robots - 1)];
}

bool validity_check(std::span<const Vec2> x, const Environment& env) {
  // Relative slack of 1e-12 so that a separation of exactly 2 r passes.
  const double min_sep2 = 4.0 * env.robot_radius * env.robot_radius * (1.0 - 1e-12);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!env.is_free(x[i])) return false;
    for (std::size_t j = i + 1; j < x.size(); ++j)
      if ((x[i] - x[j]).squaredNorm() < min_sep2) return false;
  }
  return true;
}

double proximity_penalty(std::span<const Vec2> x, double robot_radius, double varsigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      total += 1.0 / std::max(distance(x[i], x[j]) - 2.0 * robot_radius, varsigma);
  return total;
}

namespace {

double joint_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s);
}

std::uint32_t occupancy(std::span<const Vec2> x, const Environment& env) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (env.in_corridor(x[i])) mask |= 1U << i;
  return mask;
}

std::int8_t label_of(std::uint32_t mask) {
  return mask == 0 ? std::int8_t{-1} : static_cast<std::int8_t>(std::countr_zero(mask));
}

void unpack(std::span<const double> flat, JointConfiguration& out) {
  out.resize(flat.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[2 * i], flat[2 * i + 1]};
}

}  // namespace

double path_cost(const std::vector<JointConfiguration>& waypoints, double w1, double varsigma,
                 double robot_radius) {
  double total = 0.0;
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (i) total += joint_distance(waypoints[i - 1], waypoints[i]);
    total += w1 * proximity_penalty(waypoints[i], robot_radius, varsigma);
  }
  return total;
}

SegmentCheck check_segment(std::span<const Vec2> a, std::span<const Vec2> b,
                           const Environment& env) {
  SegmentCheck out;
  out.occupants = occupancy(a, env);
  double longest = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) longest = std::max(longest, distance(a[i], b[i]));
  const double step = 0.5 * env.robot_radius;
  const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(longest / step)));
  JointConfiguration x(a.size());
  for (std::size_t k = 1; k <= steps; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(steps);
    for (std::size_t i = 0; i < a.size(); ++i) x[i] = a[i] + (b[i] - a[i]) * s;
    if (!validity_check(x, env)) return out;
    out.occupants |= occupancy(x, env);
  }
  out.valid = true;
  return out;
}

JointConfiguration Roadmap::configuration(std::size_t i) const {
  JointConfiguration x;
  unpack(node(i), x);
  return x;
}

namespace {

// Fraction of the sampling box that is free for a single robot, on a fine grid.
double free_area(const Environment& env) {
  const Rect box = env.sampling_box();
  const int nx = 320, ny = 160;
  int free = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Vec2 p{box.lo.x + (i + 0.5) * (box.hi.x - box.lo.x) / nx,
                   box.lo.y + (j + 0.5) * (box.hi.y - box.lo.y) / ny};
      if (env.is_free(p)) ++free;
    }
  return box.area() * free / (nx * ny);
}

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

Vec2 uniform_in(const Rect& r, Rng& rng) {
  const double u = uniform01(rng);
  const double v = uniform01(rng);
  return {r.lo.x + u * (r.hi.x - r.lo.x), r.lo.y + v * (r.hi.y - r.lo.y)};
}

}  // namespace

Roadmap build_roadmap(const Environment& env, std::span<const int> order, int n_robots,
                      std::size_t sample_budget, std::uint64_t seed, const PlannerParams& params) {
  if (n_robots < 1 || n_robots > 8) throw std::invalid_argument("build_roadmap: robot count out of range");
  if (order.size() != static_cast<std::size_t>(n_robots))
    throw std::invalid_argument("build_roadmap: order length must equal robot count");
  if (sample_budget < 100) throw std::invalid_argument("build_roadmap: sample budget below 100");

  Roadmap rm;
  rm.n = n_robots;
  rm.order.assign(order.begin(), order.end());
  rm.seed = seed;
  rm.budget = sample_budget;
  rm.env_hash = env.hash();

  const auto n = static_cast<std::size_t>(n_robots);
  const std::size_t dim = 2 * n;
  Rng rng(seed);
  const Rect box = env.sampling_box();
  const Rect band = env.corridor_band();
  const Rect mouth{{band.lo.x - 0.4, band.lo.y}, {band.hi.x + 0.4, band.hi.y}};

  JointConfiguration x(n);
  std::size_t attempts = 0;
  const std::size_t max_attempts = sample_budget * 1000;
  while (rm.label.size() < sample_budget) {
    if (++attempts > max_attempts)
      throw PlanningFailure("build_roadmap: sampler could not place " +
                            std::to_string(sample_budget) + " valid configurations");
    const bool corridor_sample = uniform01(rng) < params.corridor_sample_fraction;
    const std::size_t chosen = corridor_sample ? static_cast<std::size_t>(rng() % n) : n;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (i == chosen) {
        x[i] = uniform_in(mouth, rng);
      } else {
        x[i] = uniform_in(box, rng);
        if (corridor_sample && env.in_corridor(x[i])) ok = false;
      }
    }
    if (!ok || !validity_check(x, env)) continue;
    const std::uint32_t occ = occupancy(x, env);
    if (std::popcount(occ) > 1) continue;
    for (const Vec2& p : x) {
      rm.coords.push_back(p.x);
      rm.coords.push_back(p.y);
    }
    rm.label.push_back(label_of(occ));
    rm.penalty.push_back(proximity_penalty(x, env.robot_radius, params.varsigma));
  }

  const std::size_t count = rm.label.size();
  const double d = static_cast<double>(dim);
  const double mu_free = std::pow(free_area(env), static_cast<double>(n));
  const double gamma = 2.0 * std::pow(1.0 + 1.0 / d, 1.0 / d) *
                       std::pow(mu_free / unit_ball_volume(static_cast<int>(dim)), 1.0 / d);
  const double log_n = std::log(static_cast<double>(count));
  const double radius = gamma * std::pow(log_n / static_cast<double>(count), 1.0 / d);
  const auto k = static_cast<std::size_t>(std::ceil(std::numbers::e * (1.0 + 1.0 / d) * log_n));

  detail::KdTree tree(rm.coords, dim);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
  candidates.reserve(count * k);
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& [d2, j] : tree.nearest(rm.node(i), k + 1)) {
      if (j == i || d2 > radius * radius) continue;
      candidates.emplace_back(std::min<std::uint32_t>(static_cast<std::uint32_t>(i), j),
                              std::max<std::uint32_t>(static_cast<std::uint32_t>(i), j));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  struct Edge {
    std::uint32_t a, b;
    double length;
    std::int8_t label;
  };
  std::vector<Edge> edges;
  JointConfiguration xa, xb;
  for (const auto& [a, b] : candidates) {
    const std::int8_t la = rm.label[a], lb = rm.label[b];
    if (la >= 0 && lb >= 0 && la != lb) continue;
    unpack(rm.node(a), xa);
    unpack(rm.node(b), xb);
    const SegmentCheck check = check_segment(xa, xb, env);
    if (!check.valid || std::popcount(check.occupants) > 1) continue;
    edges.push_back({a, b, joint_distance(xa, xb), label_of(check.occupants)});
  }

  rm.offsets.assign(count + 1, 0);
  for (const Edge& e : edges) {
    ++rm.offsets[e.a + 1];
    ++rm.offsets[e.b + 1];
  }
  for (std::size_t i = 0; i < count; ++i) rm.offsets[i + 1] += rm.offsets[i];
  rm.targets.resize(2 * edges.size());
  rm.lengths.resize(2 * edges.size());
  rm.edge_label.resize(2 * edges.size());
  std::vector<std::uint32_t> fill(rm.offsets.begin(), rm.offsets.end() - 1);
  for (const Edge& e : edges) {
    for (const auto& [from, to] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
      const std::uint32_t slot = fill[from]++;
      rm.targets[slot] = to;
      rm.lengths[slot] = e.length;
      rm.edge_label[slot] = e.label;
    }
  }
  return rm;
}

namespace {

// Per-query view of the passing order after removing robots that no longer
// need to cross.
struct PhasePlan {
  std::vector<Side> goal_side;
  std::vector<Side> start_side;
  std::vector<int> position;  // index in phases, -1 for robots already across
  std::vector<int> phases;    // slots in crossing order

  int count() const { return std::max<int>(1, static_cast<int>(phases.size())); }
  std::int8_t allowed(int m) const {
    return m < static_cast<int>(phases.size()) ? static_cast<std::int8_t>(phases[static_cast<std::size_t>(m)])
                                               : std::int8_t{-1};
  }
  std::uint32_t allowed_mask(int m) const {
    const std::int8_t a = allowed(m);
    return a < 0 ? 0U : 1U << a;
  }
  static Side opposite(Side s) { return s == Side::Left ? Side::Right : Side::Left; }

  // Sides of a configuration that may serve as an entry point into phase m
  // when reached by a straight move from the start.
  bool entry_sides_ok(std::span<const Vec2> x, const Environment& env, int m) const {
    for (std::size_t s = 0; s < x.size(); ++s) {
      const Side side = env.side_of(x[s]);
      const int o = position[s];
      if (o < 0 || o < m) {
        if (side != goal_side[s]) return false;
      } else if (o > m) {
        if (side != opposite(goal_side[s])) return false;
      }
      // A robot outside the corridor cannot cross it during the straight move.
      if (start_side[s] != Side::Inside && side != Side::Inside && side != start_side[s])
        return false;
    }
    return true;
  }

  bool sides_ok(std::span<const Vec2> x, const Environment& env, int m) const {
    for (std::size_t s = 0; s < x.size(); ++s) {
      const Side side = env.side_of(x[s]);
      const int o = position[s];
      if (o < 0 || o < m) {
        if (side != goal_side[s]) return false;
      } else if (o > m) {
        if (side != opposite(goal_side[s])) return false;
      }
    }
    return true;
  }
};

}  // namespace

std::optional<std::vector<JointConfiguration>> query_path(const Roadmap& roadmap,
                                                          const JointConfiguration& start,
                                                          const JointConfiguration& goal,
                                                          const Environment& env,
                                                          const PlannerParams& params) {
  const auto n = static_cast<std::size_t>(roadmap.n);
  if (start.size() != n || goal.size() != n)
    throw std::invalid_argument("query_path: configuration size does not match roadmap");

  PhasePlan plan;
  plan.position.assign(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    plan.goal_side.push_back(env.side_of(goal[s]));
    plan.start_side.push_back(env.side_of(start[s]));
    if (plan.goal_side[s] == Side::Inside)
      throw std::invalid_argument("query_path: goal inside the corridor");
  }
  for (int s : roadmap.order) {
    const auto slot = static_cast<std::size_t>(s);
    if (plan.start_side[slot] == plan.goal_side[slot]) continue;
    plan.position[slot] = static_cast<int>(plan.phases.size());
    plan.phases.push_back(s);
  }
  const int M = plan.count();

  if (joint_distance(start, goal) == 0.0) return std::vector<JointConfiguration>{start};

  const double w1 = params.w1;
  const double goal_penalty = proximity_penalty(goal, env.robot_radius, params.varsigma);
  const std::size_t count = roadmap.size();
  const auto K = static_cast<std::size_t>(std::max(1, params.connect_k));
  constexpr double inf = std::numeric_limits<double>::infinity();

  double best = inf;
  bool direct = false;
  if (plan.phases.size() <= 1) {
    const SegmentCheck c = check_segment(start, goal, env);
    if (c.valid && (c.occupants & ~plan.allowed_mask(0)) == 0) {
      best = joint_distance(start, goal) + w1 * goal_penalty;
      direct = true;
    }
  }

  // Nodes by distance to q; only the nearest few hundred are ordered unless
  // the filter rejects too many of them.
  auto by_distance = [&](const JointConfiguration& q) {
    std::vector<std::pair<double, std::uint32_t>> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto node = roadmap.node(i);
      double d2 = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        const double dx = node[2 * a] - q[a].x, dy = node[2 * a + 1] - q[a].y;
        d2 += dx * dx + dy * dy;
      }
      out[i] = {d2, static_cast<std::uint32_t>(i)};
    }
    return out;
  };
  JointConfiguration xn;
  auto nearest_filtered = [&](std::vector<std::pair<double, std::uint32_t>>& all, auto&& keep) {
    std::vector<std::pair<double, std::uint32_t>> kept;
    std::size_t sorted = std::min<std::size_t>(all.size(), 512);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sorted), all.end());
    for (std::size_t i = 0; i < all.size() && kept.size() < 4 * K; ++i) {
      if (i == sorted) {
        std::sort(all.begin() + static_cast<std::ptrdiff_t>(sorted), all.end());
        sorted = all.size();
      }
      if (keep(all[i].second)) kept.push_back(all[i]);
    }
    return kept;
  };
  auto from_start = by_distance(start);
  auto from_goal = by_distance(goal);

  // Goal links from the final phase.
  std::vector<double> goal_link(count, inf);
  {
    const int m = M - 1;
    const std::uint32_t allowed = plan.allowed_mask(m);
    std::size_t linked = 0;
    auto keep = [&](std::uint32_t i) {
      const std::int8_t l = roadmap.label[i];
      if (l >= 0 && (allowed & (1U << l)) == 0) return false;
      unpack(roadmap.node(i), xn);
      return plan.sides_ok(xn, env, m);
    };
    for (const auto& [d2, i] : nearest_filtered(from_goal, keep)) {
      if (linked >= K) break;
      unpack(roadmap.node(i), xn);
      const SegmentCheck c = check_segment(xn, goal, env);
      if (!c.valid || (c.occupants & ~allowed) != 0) continue;
      goal_link[i] = std::sqrt(d2) + w1 * goal_penalty;
      ++linked;
    }
  }

  const std::size_t states = count * static_cast<std::size_t>(M);
  std::vector<double> g(states, inf);
  std::vector<std::int64_t> parent(states, -1);
  using Item = std::pair<double, std::uint64_t>;  // (f, state)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;

  std::vector<double> h(count, -1.0);
  auto heuristic = [&](std::uint32_t i) {
    if (h[i] < 0.0) {
      const auto node = roadmap.node(i);
      double d2 = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        const double dx = node[2 * a] - goal[a].x, dy = node[2 * a + 1] - goal[a].y;
        d2 += dx * dx + dy * dy;
      }
      h[i] = std::sqrt(d2);
    }
    return h[i];
  };

  for (int m = 0; m < M; ++m) {
    const std::uint32_t allowed = plan.allowed_mask(m);
    auto keep = [&](std::uint32_t i) {
      const std::int8_t l = roadmap.label[i];
      if (l >= 0 && (allowed & (1U << l)) == 0) return false;
      unpack(roadmap.node(i), xn);
      return plan.entry_sides_ok(xn, env, m);
    };
    std::size_t linked = 0;
    for (const auto& [d2, i] : nearest_filtered(from_start, keep)) {
      if (linked >= K) break;
      unpack(roadmap.node(i), xn);
      if (!check_segment(start, xn, env).valid) continue;
      ++linked;
      const std::uint64_t s = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(M) +
                              static_cast<std::uint64_t>(m);
      const double cost = std::sqrt(d2) + w1 * roadmap.penalty[i];
      if (cost < g[s]) {
        g[s] = cost;
        parent[s] = -1;
        open.emplace(cost + heuristic(i), s);
      }
    }
  }

  std::int64_t best_state = -1;
  while (!open.empty()) {
    const auto [f, s] = open.top();
    open.pop();
    if (f >= best) break;
    const auto node = static_cast<std::uint32_t>(s / static_cast<std::uint64_t>(M));
    const int m = static_cast<int>(s % static_cast<std::uint64_t>(M));
    const double gs = g[s];
    if (f > gs + heuristic(node) + 1e-9) continue;  // stale entry

    if (m == M - 1 && gs + goal_link[node] < best) {
      best = gs + goal_link[node];
      best_state = static_cast<std::int64_t>(s);
      direct = false;
    }
    const std::int8_t allowed = plan.allowed(m);
    for (std::uint32_t e = roadmap.offsets[node]; e < roadmap.offsets[node + 1]; ++e) {
      const std::int8_t l = roadmap.edge_label[e];
      if (l >= 0 && l != allowed) continue;
      const std::uint32_t to = roadmap.targets[e];
      const std::uint64_t t = static_cast<std::uint64_t>(to) * static_cast<std::uint64_t>(M) +
                              static_cast<std::uint64_t>(m);
      const double cost = gs + roadmap.lengths[e] + w1 * roadmap.penalty[to];
      if (cost < g[t]) {
        g[t] = cost;
        parent[t] = static_cast<std::int64_t>(s);
        open.emplace(cost + heuristic(to), t);
      }
    }
    if (m + 1 < M && roadmap.label[node] < 0) {
      const auto crossing = static_cast<std::size_t>(plan.phases[static_cast<std::size_t>(m)]);
      const auto p = roadmap.node(node);
      if (env.side_of({p[2 * crossing], p[2 * crossing + 1]}) == plan.goal_side[crossing]) {
        const std::uint64_t t = s + 1;
        if (gs < g[t]) {
          g[t] = gs;
          parent[t] = static_cast<std::int64_t>(s);
          open.emplace(gs + heuristic(node), t);
        }
      }
    }
  }

  if (direct) return std::vector<JointConfiguration>{start, goal};
  if (best_state < 0) return std::nullopt;

  std::vector<JointConfiguration> reversed{goal};
  std::int64_t last_node = -1;
  for (std::int64_t s = best_state; s >= 0; s = parent[static_cast<std::size_t>(s)]) {
    const auto node = static_cast<std::int64_t>(static_cast<std::uint64_t>(s) /
                                                static_cast<std::uint64_t>(M));
    if (node != last_node) reversed.push_back(roadmap.configuration(static_cast<std::size_t>(node)));
    last_node = node;
  }
  reversed.push_back(start);
  std::reverse(reversed.begin(), reversed.end());
  reversed.erase(std::unique(reversed.begin(), reversed.end()), reversed.end());
  return reversed;
}

RobotState JointPath::state(std::size_t slot, double t) const {
  if (waypoints.empty()) throw std::logic_error("JointPath: empty path");
  if (t < times.front()) return {waypoints.front()[slot], {}};
  if (t >= times.back()) return {waypoints.back()[slot], {}};
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto i = static_cast<std::size_t>(it - times.begin()) - 1;
  const double span = times[i + 1] - times[i];
  const Vec2 a = waypoints[i][slot], b = waypoints[i + 1][slot];
  const double s = (t - times[i]) / span;
  return {a + (b - a) * s, (b - a) / span};
}

std::vector<RobotState> JointPath::sample(std::size_t slot, double t_begin, double t_end,
                                          double dt) const {
  std::vector<RobotState> out;
  const auto steps = static_cast<std::size_t>(std::llround((t_end - t_begin) / dt));
  out.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) out.push_back(state(slot, t_begin + static_cast<double>(k) * dt));
  return out;
}

JointPath interpolate(const std::vector<JointConfiguration>& waypoints, double v_max, double t0) {
  if (waypoints.empty()) throw std::invalid_argument("interpolate: no waypoints");
  if (!(v_max > 0.0)) throw std::invalid_argument("interpolate: v_max must be positive");
  JointPath path;
  path.t0 = t0;
  path.times.push_back(t0);
  path.waypoints.push_back(waypoints.front());
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    double longest = 0.0;
    for (std::size_t r = 0; r < waypoints[i].size(); ++r)
      longest = std::max(longest, distance(waypoints[i - 1][r], waypoints[i][r]));
    if (longest == 0.0) continue;
    path.times.push_back(path.times.back() + longest / v_max);
    path.waypoints.push_back(waypoints[i]);
  }
  return path;
}

JointPath hold_path(const JointConfiguration& x, double t0) {
  JointPath path;
  path.t0 = t0;
  path.times = {t0};
  path.waypoints = {x};
  return path;
}

std::optional<CrossingTimes> crossing_times(const JointPath& path, std::size_t slot,
                                            const Environment& env, double dt) {
  std::optional<CrossingTimes> out;
  const auto steps = static_cast<std::size_t>(std::ceil((path.end_time() - path.t0) / dt));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = std::min(path.t0 + static_cast<double>(k) * dt, path.end_time());
    if (!env.in_corridor(path.state(slot, t).p)) continue;
    if (!out) out = CrossingTimes{t, t};
    out->exit = t;
  }
  return out;
}

}  // namespace nodnav::planner
