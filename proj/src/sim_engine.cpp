#include "nodnav/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <type_traits>

#include "json.hpp"
#include "nodnav/estimation.hpp"

namespace nodnav::sim {

using nlohmann::json;

std::string to_string(nod::MaskedTermMode mode) {
  return mode == nod::MaskedTermMode::Omit ? "omit" : "half_constant";
}

nod::MaskedTermMode parse_masked_mode(const std::string& name) {
  if (name == "omit") return nod::MaskedTermMode::Omit;
  if (name == "half_constant") return nod::MaskedTermMode::HalfConstant;
  throw ConfigError("nod.masked_terms: expected omit or half_constant, got '" + name + "'");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::DeadlockTimeout: break;
  }
  return "deadlock_timeout";
}

namespace {

bool is_multiple(double a, double b) {
  const double q = a / b;
  return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q);
}

std::string field(const char* name, std::size_t i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void Scenario::validate(const Environment& env) const {
  const int n = robots();
  if (n < 1 || n > 6) throw ConfigError("origins: expected 1 to 6 robots, got " + std::to_string(n));
  if (destinations.size() != origins.size())
    throw ConfigError("destinations: expected " + std::to_string(n) + " entries");
  const double sep = 2.0 * env.robot_radius;
  for (const auto* list : {&origins, &destinations}) {
    const char* name = list == &origins ? "origins" : "destinations";
    for (std::size_t i = 0; i < list->size(); ++i) {
      if (!env.is_free((*list)[i])) throw ConfigError(field(name, i) + ": not in free space");
      if (list == &destinations && env.in_corridor((*list)[i]))
        throw ConfigError(field(name, i) + ": inside the corridor");
      for (std::size_t j = 0; j < i; ++j)
        if (distance((*list)[i], (*list)[j]) < sep)
          throw ConfigError(field(name, i) + ": closer than 2 r to " + field(name, j));
    }
  }
  if (k > n - 1) throw ConfigError("k: exceeds robot count minus one");
  const std::size_t ns = game::enumerate_strategies(n).size();
  auto check_rows = [&](const std::vector<std::vector<double>>& rows, const char* name) {
    if (rows.size() != static_cast<std::size_t>(n))
      throw ConfigError(std::string(name) + ": expected one row per robot");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != ns)
        throw ConfigError(field(name, i) + ": expected " + std::to_string(ns) + " values");
      for (double v : rows[i])
        if (!std::isfinite(v)) throw ConfigError(field(name, i) + ": non-finite value");
    }
  };
  if (initial == InitialOpinions::Explicit) check_rows(opinions, "initial_opinions");
  if (!biases.empty()) check_rows(biases, "biases");
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("sim.dt: must be positive");
  if (!(T > 0.0) || !is_multiple(T, dt)) throw ConfigError("sim.T: must be a positive multiple of sim.dt");
  if (!(T_f > 0.0) || !is_multiple(T_f, T)) throw ConfigError("sim.T_f: must be a positive multiple of sim.T");
  if (!(success_epsilon > 0.0)) throw ConfigError("sim.success_epsilon: must be positive");
  if (threads < 0) throw ConfigError("sim.threads: must be nonnegative");
  try {
    nod.validate(0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(K1 > 0.0)) throw ConfigError("nod.K1: must be positive");
  if (!(K2 > 0.0)) throw ConfigError("nod.K2: must be positive");
  if (!(conflict.delta > 0.0)) throw ConfigError("conflict.delta: must be positive");
  if (planner.budgets.empty()) throw ConfigError("planner.budgets: empty");
  for (std::size_t b : planner.budgets)
    if (b < 100) throw ConfigError("planner.budgets: every budget must be at least 100");
  if (!(planner.w1 >= 0.0)) throw ConfigError("planner.w1: must be nonnegative");
  if (!(planner.varsigma > 0.0)) throw ConfigError("planner.varsigma: must be positive");
  if (!(planner.corridor_sample_fraction >= 0.0 && planner.corridor_sample_fraction < 1.0))
    throw ConfigError("planner.corridor_sample_fraction: must lie in [0, 1)");
  if (planner.connect_k < 1) throw ConfigError("planner.connect_k: must be positive");
  try {
    mpc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string SimConfig::canonical() const {
  std::ostringstream out;
  visit_fields(*this, [&](const char* name, const auto& value) {
    const std::string key = name;
    if (key == "sim.seed" || key == "sim.threads") return;
    using V = std::decay_t<decltype(value)>;
    out << key << '=';
    if constexpr (std::is_same_v<V, double>) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", value);
      out << buf;
    } else if constexpr (std::is_same_v<V, bool>) {
      out << (value ? "true" : "false");
    } else if constexpr (std::is_same_v<V, nod::MaskedTermMode>) {
      out << to_string(value);
    } else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) {
      for (std::size_t i = 0; i < value.size(); ++i) out << (i ? "," : "") << value[i];
    } else {
      out << value;
    }
    out << '\n';
  });
  return out.str();
}

std::uint64_t SimConfig::hash() const { return fnv1a(canonical()); }

std::optional<Outcome> detect_outcome(std::span<const RobotState> states,
                                      std::span<const Vec2> destinations, double t,
                                      const SimConfig& config, const Environment& env) {
  const double limit = 2.0 * env.robot_radius * (1.0 - 1e-6);
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      if (distance(states[i].p, states[j].p) < limit) return Outcome::Collision;
  bool arrived = true;
  for (std::size_t i = 0; i < states.size(); ++i)
    arrived = arrived && distance(states[i].p, destinations[i]) <= config.success_epsilon;
  if (arrived) return Outcome::Success;
  if (t >= config.T_f - 1e-9) return Outcome::DeadlockTimeout;
  return std::nullopt;
}

std::vector<std::vector<double>> initial_opinions(const Scenario& scenario, const SimConfig& config,
                                                  const Environment& env) {
  const int n = scenario.robots();
  const auto strategies = game::enumerate_strategies(n);
  switch (scenario.initial) {
    case InitialOpinions::Explicit:
      return scenario.opinions;
    case InitialOpinions::DistanceBased: {
      std::vector<double> d;
      for (const Vec2& p : scenario.origins)
        d.push_back(game::corridor_distance(p, env.side_of(p), config.conflict));
      const auto z = game::distance_based_initial_opinion(strategies, d, config.K2, config.k2_outside);
      return std::vector<std::vector<double>>(static_cast<std::size_t>(n), z);
    }
    case InitialOpinions::Zero:
      break;
  }
  return std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                          std::vector<double>(strategies.size(), 0.0));
}

namespace {

struct Plan {
  std::shared_ptr<const planner::JointPath> path;
  bool failed = false;
};

// Queries issued within one epoch, shared by every robot: the result depends
// only on the planned group, its passing order and the current positions.
class EpochPlans {
 public:
  EpochPlans(planner::RoadmapStore& store, std::span<const Vec2> destinations)
      : store_(store), destinations_(destinations) {}

  void reset(double t, std::vector<Vec2> positions) {
    t_ = t;
    positions_ = std::move(positions);
    plans_.clear();
  }

  Plan get(const std::vector<int>& group, const std::vector<int>& order) {
    auto key = std::make_pair(group, order);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<int> slots;
    for (int r : order)
      slots.push_back(static_cast<int>(std::find(group.begin(), group.end(), r) - group.begin()));
    planner::JointConfiguration start, goal;
    for (int r : group) {
      start.push_back(positions_[static_cast<std::size_t>(r)]);
      goal.push_back(destinations_[static_cast<std::size_t>(r)]);
    }
    const int n = static_cast<int>(group.size());
    const auto& env = store_.environment();
    const auto waypoints = planner::query_path(store_.get(n, slots), start, goal, env, store_.params());
    Plan plan;
    if (waypoints) {
      plan.path = std::make_shared<planner::JointPath>(planner::interpolate(*waypoints, env.v_max, t_));
    } else {
      plan.path = std::make_shared<planner::JointPath>(planner::hold_path(start, t_));
      plan.failed = true;
    }
    plans_.emplace(std::move(key), plan);
    return plan;
  }

 private:
  planner::RoadmapStore& store_;
  std::span<const Vec2> destinations_;
  double t_ = 0.0;
  std::vector<Vec2> positions_;
  std::map<std::pair<std::vector<int>, std::vector<int>>, Plan> plans_;
};

struct Agent {
  nod::OpinionState z;
  nod::NodParams params;
  game::GamePlayerSet players;
  nod::AdjacencyMask mask;
  std::vector<int> group;    // owner and players, ascending
  std::vector<Plan> plans;   // one per global strategy
  std::vector<double> x;
  int selected = 0;
  bool done = false;
  Vec2 rate{};  // spline velocity at the end of the last tick; MPC initial condition
  std::vector<Vec2> previous;  // last MPC solution, empty after holding
};

class Episode {
 public:
  Episode(const Scenario& scenario, const SimConfig& config, planner::RoadmapStore& store)
      : scenario_(scenario),
        config_(config),
        env_(store.environment()),
        strategies_(game::enumerate_strategies(scenario.robots())),
        n_(static_cast<std::size_t>(scenario.robots())),
        ticks_per_epoch_(static_cast<int>(std::lround(config.T / config.dt))),
        rng_(config.seed),
        plans_(store, scenario.destinations) {
    mpc_ = config.mpc;
    mpc_.tick = config.dt;
    const auto z0 = initial_opinions(scenario, config, env_);
    agents_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      agents_[i].z = z0[i];
      agents_[i].params = config.nod;
      agents_[i].params.T = config.T;
      agents_[i].params.b = scenario.biases.empty() ? std::vector<double>{} : scenario.biases[i];
    }
    trace_.scenario = scenario.name;
    trace_.config_hash = config.hash();
    trace_.seed = config.seed;
    trace_.dt = config.dt;
    trace_.T = config.T;
    trace_.destinations = scenario.destinations;
    for (const auto& s : strategies_) trace_.strategies.push_back(s.to_string());
  }

  Trace run() {
    std::vector<RobotState> states(n_);
    for (std::size_t i = 0; i < n_; ++i) states[i].p = scenario_.origins[i];
    std::vector<std::uint8_t> held(n_, 0);
    double min_sep = std::numeric_limits<double>::infinity();
    for (int step = 0;; ++step) {
      const double t = step * config_.dt;
      trace_.ticks.push_back({step, t, states, held});
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) min_sep = std::min(min_sep, distance(states[i].p, states[j].p));
        if (distance(states[i].p, scenario_.destinations[i]) <= config_.success_epsilon) agents_[i].done = true;
      }
      if (const auto outcome = detect_outcome(states, scenario_.destinations, t, config_, env_)) {
        finish(*outcome, t, min_sep);
        break;
      }
      if (step % ticks_per_epoch_ == 0) epoch(step / ticks_per_epoch_, t, states);
      advance(t, states, held);
    }
    return std::move(trace_);
  }

 private:
  void epoch(int n, double t, const std::vector<RobotState>& states) {
    std::vector<Vec2> positions(n_);
    for (std::size_t i = 0; i < n_; ++i) positions[i] = states[i].p;
    // Windows are compared against the plans made one epoch ago.
    const std::size_t first_tick = trace_.ticks.size() - 1 - static_cast<std::size_t>(ticks_per_epoch_);
    const std::size_t ns = strategies_.size();

    plans_.reset(t, positions);
    EpochRecord record{n, t, {}};
    for (std::size_t i = 0; i < n_; ++i) {
      Agent& a = agents_[i];
      if (!a.done) {
        if (n >= 1) update_opinion(a, n, first_tick);
        const auto scores = game::conflict_scores(static_cast<int>(i), positions, env_, config_.conflict);
        a.players = game::select_game_players(static_cast<int>(i), scores, scenario_.capacity());
        a.mask = game::build_adjacency(static_cast<int>(i), a.players, strategies_, true);
        a.group = a.players.players;
        a.group.insert(std::lower_bound(a.group.begin(), a.group.end(), static_cast<int>(i)),
                       static_cast<int>(i));
        a.plans.assign(ns, {});
        for (std::size_t s = 0; s < ns; ++s)
          a.plans[s] = plans_.get(a.group, game::restrict_order(strategies_[s], a.group));
        const auto sel = nod::softmax_select(a.z, a.params.eta, rng_);
        a.x = sel.probabilities;
        a.selected = static_cast<int>(sel.chosen);
      }
      record.robots.push_back({a.z, a.x.empty() ? nod::softmax(a.z, a.params.eta) : a.x, a.selected,
                               a.players.players,
                               !a.plans.empty() && a.plans[static_cast<std::size_t>(a.selected)].failed,
                               a.done});
    }
    trace_.epochs.push_back(std::move(record));
  }

  void update_opinion(Agent& a, int n, std::size_t first_tick) {
    const std::size_t ns = strategies_.size();
    nod::SocialTermMatrix social(n_, ns);
    std::vector<double> raw(ns);
    for (int k : a.players.players) {
      estimation::PathWindow observed, predicted;
      for (std::size_t s = first_tick; s < trace_.ticks.size(); ++s) {
        observed.times.push_back(trace_.ticks[s].t);
        observed.states.push_back(trace_.ticks[s].states[static_cast<std::size_t>(k)]);
      }
      predicted.times = observed.times;
      const auto slot = static_cast<std::size_t>(
          std::find(a.group.begin(), a.group.end(), k) - a.group.begin());
      for (std::size_t l = 0; l < ns; ++l) {
        predicted.states.clear();
        for (double tau : observed.times) predicted.states.push_back(a.plans[l].path->state(slot, tau));
        raw[l] = estimation::raw_strategy_opinion(observed, predicted, config_.K1);
      }
      estimation::estimate_social_terms(raw, a.mask, static_cast<std::size_t>(k), social);
    }
    a.z = nod::discrete_nod_update(a.z, social, a.mask, a.params, static_cast<std::uint64_t>(n - 1),
                                   config_.masked);
  }

  void advance(double t, std::vector<RobotState>& states, std::vector<std::uint8_t>& held) {
    std::vector<Vec2> now(n_);
    for (std::size_t i = 0; i < n_; ++i) now[i] = states[i].p;
    std::vector<RobotState> next(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      Agent& a = agents_[i];
      next[i] = {states[i].p, {}};
      held[i] = 0;
      const Vec2 rate = a.rate;
      a.rate = {};
      std::vector<Vec2> previous = std::move(a.previous);
      a.previous.clear();
      if (a.done) continue;
      const auto& plan = *a.plans[static_cast<std::size_t>(a.selected)].path;
      const auto slot = static_cast<std::size_t>(
          std::find(a.group.begin(), a.group.end(), static_cast<int>(i)) - a.group.begin());
      mpc::MpcInput input{t, {states[i].p, rate}, {&plan, slot, {}}, {}, {}, std::move(previous)};
      for (std::size_t o = 0; o < n_; ++o) {
        if (o == i) continue;
        input.predicted.push_back(mpc::predicted_path_of(static_cast<int>(o), a.players, plan, a.group, states));
        input.others_now.push_back(now[o]);
      }
      const auto result = mpc::solve_mpc(input, env_, mpc_);
      if (result.infeasible) ++infeasible_ticks_;
      Vec2 v = (mpc::spline_eval(result.trajectory, t + config_.dt).p - states[i].p) / config_.dt;
      if (v.norm() > env_.v_max) v = v * (env_.v_max / v.norm());
      const Vec2 target = states[i].p + v * config_.dt;
      if (result.infeasible || !env_.is_free(target) ||
          !mpc::step_is_safe(states[i].p, target, input.others_now, env_.robot_radius, env_.v_max,
                             config_.dt)) {
        held[i] = 1;
        continue;
      }
      next[i] = {target, v};
      a.rate = mpc::spline_eval(result.trajectory, t + config_.dt).v;
      if (a.rate.norm() > env_.v_max) a.rate = a.rate * (env_.v_max / a.rate.norm());
      a.previous = result.trajectory.control_points;
    }
    states = std::move(next);
  }

  void finish(Outcome outcome, double t, double min_sep) {
    OutcomeRecord& rec = trace_.outcome;
    rec.outcome = outcome;
    rec.t = t;
    rec.min_separation = n_ > 1 ? min_sep : 0.0;
    rec.infeasible_ticks = infeasible_ticks_;

    std::vector<int> entry(n_, -1);
    for (const auto& tick : trace_.ticks)
      for (std::size_t i = 0; i < n_; ++i)
        if (entry[i] < 0 && env_.in_corridor(tick.states[i].p)) entry[i] = tick.step;
    std::vector<int> order(n_);
    for (std::size_t i = 0; i < n_; ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const int ea = entry[static_cast<std::size_t>(a)], eb = entry[static_cast<std::size_t>(b)];
      if ((ea < 0) != (eb < 0)) return eb < 0;
      return ea < eb;
    });
    rec.crossing_order = order;

    // Strategy held by each crossing robot during the epoch in which it entered.
    int agreed = -2;
    for (std::size_t i = 0; i < n_; ++i) {
      if (entry[i] < 0) continue;
      const auto e = static_cast<std::size_t>(std::max(0, entry[i] - 1) / ticks_per_epoch_);
      if (e >= trace_.epochs.size()) {
        agreed = -1;
        break;
      }
      const int s = trace_.epochs[e].robots[i].strategy;
      agreed = agreed == -2 ? s : (agreed == s ? s : -1);
    }
    if (agreed >= 0) {
      rec.consensus = agreed;
      rec.consensus_from_entry = true;
    } else if (outcome == Outcome::Success) {
      rec.consensus = static_cast<int>(game::strategy_index(order));
    }
  }

  const Scenario& scenario_;
  const SimConfig& config_;
  const Environment& env_;
  std::vector<game::Strategy> strategies_;
  std::size_t n_;
  int ticks_per_epoch_;
  Rng rng_;
  EpochPlans plans_;
  mpc::MpcParams mpc_;
  std::vector<Agent> agents_;
  int infeasible_ticks_ = 0;
  Trace trace_;
};

json vec(Vec2 p) { return json::array({p.x, p.y}); }

json one_based(const std::vector<int>& v) {
  json a = json::array();
  for (int x : v) a.push_back(x + 1);
  return a;
}

}  // namespace

Trace run_episode(const Scenario& scenario, const SimConfig& config, planner::RoadmapStore& store) {
  config.validate();
  scenario.validate(store.environment());
  return Episode(scenario, config, store).run();
}

void write_trace(const Trace& trace, std::ostream& out) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(trace.config_hash));
  json header{{"type", "header"},     {"schema", kTraceSchema}, {"scenario", trace.scenario},
              {"config_hash", hash},  {"seed", trace.seed},     {"dt", trace.dt},
              {"T", trace.T},         {"strategies", trace.strategies}};
  json dest = json::array();
  for (const Vec2& d : trace.destinations) dest.push_back(vec(d));
  header["destinations"] = dest;
  out << header.dump() << '\n';

  const std::size_t per_epoch =
      static_cast<std::size_t>(std::lround(trace.T / trace.dt));
  std::size_t e = 0;
  for (const auto& tick : trace.ticks) {
    json p = json::array(), v = json::array(), held = json::array();
    for (std::size_t i = 0; i < tick.states.size(); ++i) {
      p.push_back(vec(tick.states[i].p));
      v.push_back(vec(tick.states[i].v));
      held.push_back(tick.held[i] != 0);
    }
    out << json{{"type", "tick"}, {"step", tick.step}, {"t", tick.t}, {"p", p}, {"v", v}, {"held", held}}.dump()
        << '\n';
    if (e < trace.epochs.size() && static_cast<std::size_t>(tick.step) == e * per_epoch) {
      const auto& ep = trace.epochs[e++];
      json robots = json::array();
      for (const auto& r : ep.robots)
        robots.push_back({{"z", r.z},
                          {"x", r.x},
                          {"strategy", r.strategy + 1},
                          {"players", one_based(r.players)},
                          {"plan_failed", r.plan_failed},
                          {"done", r.done}});
      out << json{{"type", "epoch"}, {"epoch", ep.epoch}, {"t", ep.t}, {"robots", robots}}.dump() << '\n';
    }
  }
  const auto& o = trace.outcome;
  out << json{{"type", "outcome"},
              {"outcome", to_string(o.outcome)},
              {"t", o.t},
              {"consensus", o.consensus >= 0 ? json(o.consensus + 1) : json(nullptr)},
              {"consensus_source", o.consensus < 0 ? "none" : (o.consensus_from_entry ? "entry" : "crossing")},
              {"crossing_order", one_based(o.crossing_order)},
              {"min_separation", o.min_separation},
              {"infeasible_ticks", o.infeasible_ticks}}
             .dump()
      << '\n';
}

BatchResult run_batch(const Scenario& scenario, const SimConfig& config, int trials,
                      planner::RoadmapStore& store, const TraceSink& sink) {
  if (trials < 1) throw ConfigError("trials: must be at least 1");
  config.validate();
  scenario.validate(store.environment());

  BatchResult result;
  result.trials = trials;
  result.strategy_counts.assign(game::enumerate_strategies(scenario.robots()).size(), 0);
  result.outcomes.resize(static_cast<std::size_t>(trials));

  std::atomic<int> next{0};
  std::mutex sink_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (int i = next++; i < trials; i = next++) {
      try {
        SimConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        Trace trace = Episode(scenario, c, store).run();
        result.outcomes[static_cast<std::size_t>(i)] = trace.outcome;
        if (sink) {
          std::lock_guard lock(sink_mutex);
          sink(i, trace);
        }
      } catch (...) {
        std::lock_guard lock(sink_mutex);
        if (!error) error = std::current_exception();
        next = trials;
      }
    }
  };
  const int workers = std::min(
      trials, config.threads > 0 ? config.threads
                                 : std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  double total_time = 0.0;
  for (const auto& o : result.outcomes) {
    if (o.outcome != Outcome::Success) continue;
    ++result.successes;
    total_time += o.t;
    if (o.consensus >= 0) ++result.strategy_counts[static_cast<std::size_t>(o.consensus)];
  }
  result.mean_time = result.successes ? total_time / result.successes
                                      : std::numeric_limits<double>::quiet_NaN();
  return result;
}

std::vector<HeatmapCell> heatmap_direct(const nod::NodParams& params, const HeatmapGrid& grid) {
  if (grid.resolution < 1) throw ConfigError("grid.resolution: must be positive");
  std::vector<HeatmapCell> cells;
  const std::vector<nod::NodParams> both(2, params);
  for (int i = 0; i < grid.resolution; ++i) {
    for (int j = 0; j < grid.resolution; ++j) {
      const double a = grid.value(i), b = grid.value(j);
      // Mean-free initial opinions: selection is shift invariant, and the
      // mirrored cells then start from exactly label-swapped states.
      std::vector<nod::OpinionState> z0{{a / 2, -a / 2}, {b / 2, -b / 2}};
      const auto steady = nod::integrate_to_steady_state(std::move(z0), both, 0.01);
      cells.push_back({a, b, nod::softmax(steady.z[0], params.eta)[0],
                       nod::softmax(steady.z[1], params.eta)[0]});
    }
  }
  return cells;
}

std::vector<HeatmapCell> heatmap_framework(const Scenario& scenario, const SimConfig& config,
                                           const HeatmapGrid& grid, int trials,
                                           planner::RoadmapStore& store) {
  if (scenario.robots() != 2) throw ConfigError("scenario: heatmap sweeps need exactly 2 robots");
  if (grid.resolution < 1) throw ConfigError("grid.resolution: must be positive");
  std::vector<HeatmapCell> cells;
  for (int i = 0; i < grid.resolution; ++i) {
    for (int j = 0; j < grid.resolution; ++j) {
      const double a = grid.value(i), b = grid.value(j);
      Scenario cell = scenario;
      cell.initial = InitialOpinions::Explicit;
      cell.opinions = {{a, 0.0}, {b, 0.0}};
      const BatchResult r = run_batch(cell, config, trials, store);
      const double x = r.successes ? static_cast<double>(r.strategy_counts[0]) / r.successes
                                   : std::numeric_limits<double>::quiet_NaN();
      cells.push_back({a, b, x, x});
    }
  }
  return cells;
}

}  // namespace nodnav::sim
