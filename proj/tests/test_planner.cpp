#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nodnav/planner.hpp"
#include "nodnav/strategy_game.hpp"

using namespace nodnav;
using namespace nodnav::planner;

namespace {

const Environment kEnv = Environment::corridor_world();

double length(const std::vector<JointConfiguration>& w) {
  double total = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < w[i].size(); ++r) s += (w[i][r] - w[i - 1][r]).squaredNorm();
    total += std::sqrt(s);
  }
  return total;
}

// Shortest path for one robot between the rooms, hugging the corridor's
// inflated corners at y = +/-0.2. The true optimum rounds those corners, so
// this is a lower bound.
double corner_bound(Vec2 a, Vec2 b) {
  const double y = a.y >= 0.0 ? 0.2 : -0.2;
  const Vec2 ca{a.x < 0 ? -3.0 : 3.0, y};
  const Vec2 cb{b.x < 0 ? -3.0 : 3.0, b.y >= 0.0 ? 0.2 : -0.2};
  return distance(a, ca) + distance(ca, cb) + distance(cb, b);
}

PlannerParams default_params() { return PlannerParams{}; }

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nodnav_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("validity check") {
  CHECK_FALSE(validity_check(std::vector<Vec2>{{-5, 0}, {-5, 0}}, kEnv));
  CHECK(validity_check(std::vector<Vec2>{{-5, 0}, {-5, 0.6}}, kEnv));
  CHECK_FALSE(validity_check(std::vector<Vec2>{{-5, 0}, {-5, 0.59}}, kEnv));
  CHECK_FALSE(validity_check(std::vector<Vec2>{{0, 2}}, kEnv));
  CHECK_FALSE(validity_check(std::vector<Vec2>{{-7.9, 0}}, kEnv));
  CHECK(validity_check(std::vector<Vec2>{{0, 0}}, kEnv));
  CHECK_FALSE(validity_check(std::vector<Vec2>{{0, 0.25}}, kEnv));
}

TEST_CASE("proximity penalty and path cost") {
  CHECK(proximity_penalty(std::vector<Vec2>{{0, 0}, {1.6, 0}}, 0.3, 0.1) == doctest::Approx(1.0));
  CHECK(proximity_penalty(std::vector<Vec2>{{0, 0}, {0.65, 0}}, 0.3, 0.1) == doctest::Approx(10.0));
  CHECK(proximity_penalty(std::vector<Vec2>{{0, 0}, {0.6, 0}}, 0.3, 0.1) == doctest::Approx(10.0));
  CHECK(proximity_penalty(std::vector<Vec2>{{0, 0}, {10.6, 0}, {5.3, 10.6 * std::sqrt(0.75)}}, 0.3,
                          0.1) == doctest::Approx(0.3));

  const JointConfiguration a{{-6, 0}, {4.6, 0}};
  const double s = 3.0 / std::sqrt(2.0) / std::sqrt(2.0);  // each robot moves 3/sqrt(2)
  const JointConfiguration b{{-6 + s, s}, {4.6 + s, s}};
  CHECK(path_cost({a, b}, 0.4, 0.1, 0.3) == doctest::Approx(3.08));
  CHECK(path_cost({a}, 0.4, 0.1, 0.3) == doctest::Approx(0.04));
  const JointConfiguration mid{{-6 + s / 2, s / 2}, {4.6 + s / 2, s / 2}};
  CHECK(length({a, mid, b}) == doctest::Approx(length({a, b})));
}

TEST_CASE("interpolation") {
  const std::vector<JointConfiguration> w{{{-6, 2}, {5, -2}}, {{-4, 2}, {5, -2}}, {{-1, 2}, {5, -2}}};
  const JointPath path = interpolate(w, 1.0, 10.0);
  CHECK(path.end_time() == doctest::Approx(15.0));
  CHECK(path.times[1] - path.times[0] >= 2.0 - 1e-12);
  for (double t = 10.0; t < 16.0; t += 0.05) {
    const auto moving = path.state(0, t);
    const auto parked = path.state(1, t);
    CHECK(parked.v.norm() == 0.0);
    CHECK(parked.p == Vec2{5, -2});
    CHECK(moving.v.norm() <= 1.0 + 1e-9);
  }
  CHECK(path.state(0, 12.5).p.x == doctest::Approx(-3.5));
  CHECK(path.state(0, 100.0).p == Vec2{-1, 2});

  // A slower robot moves proportionally.
  const JointPath two = interpolate({{{0, 0}, {0, 3}}, {{2, 0}, {1, 3}}}, 1.0, 0.0);
  CHECK(two.end_time() == doctest::Approx(2.0));
  CHECK(two.state(1, 1.0).v.x == doctest::Approx(0.5));
}

TEST_CASE("single-robot roadmap") {
  const auto params = default_params();
  const std::vector<int> order{0};
  const Roadmap rm = build_roadmap(kEnv, order, 1, 1000, 7, params);
  CHECK(rm.size() == 1000);
  const JointConfiguration start{{-5, 1.5}}, goal{{5, 1.5}};
  const auto path = query_path(rm, start, goal, kEnv, params);
  REQUIRE(path.has_value());
  const double bound = corner_bound(start[0], goal[0]);
  CHECK(length(*path) >= bound - 1e-9);
  CHECK(length(*path) <= 1.05 * bound);

  SUBCASE("determinism") {
    const Roadmap again = build_roadmap(kEnv, order, 1, 1000, 7, params);
    CHECK(again.coords == rm.coords);
    CHECK(again.targets == rm.targets);
    CHECK(again.lengths == rm.lengths);
  }
  SUBCASE("start equal to goal") {
    const auto same = query_path(rm, start, start, kEnv, params);
    REQUIRE(same.has_value());
    CHECK(same->size() == 1);
  }
  SUBCASE("same-side query uses a straight move") {
    const auto p = query_path(rm, JointConfiguration{{-6, 2}}, JointConfiguration{{-5, -2}}, kEnv, params);
    REQUIRE(p.has_value());
    CHECK(p->size() == 2);
  }
  SUBCASE("roadmap query is no worse than any direct edge") {
    for (std::size_t a = 0; a < rm.size(); a += 97) {
      for (std::uint32_t e = rm.offsets[a]; e < rm.offsets[a + 1]; ++e) {
        const auto xa = rm.configuration(a);
        const auto xb = rm.configuration(rm.targets[e]);
        if (kEnv.in_corridor(xa[0]) || kEnv.in_corridor(xb[0])) continue;
        if (kEnv.side_of(xa[0]) != kEnv.side_of(xb[0])) continue;
        const auto q = query_path(rm, xa, xb, kEnv, params);
        REQUIRE(q.has_value());
        CHECK(path_cost(*q, params.w1, params.varsigma, 0.3) <=
              path_cost({xa, xb}, params.w1, params.varsigma, 0.3) + 1e-9);
      }
    }
  }
}

TEST_CASE("larger budgets do not worsen the median path cost") {
  const auto params = default_params();
  const std::vector<int> order{0};
  const JointConfiguration start{{-6, -2.5}}, goal{{6, 2.5}};
  std::vector<double> small, large;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto a = query_path(build_roadmap(kEnv, order, 1, 1000, seed, params), start, goal, kEnv, params);
    const auto b = query_path(build_roadmap(kEnv, order, 1, 2000, seed, params), start, goal, kEnv, params);
    small.push_back(a ? path_cost(*a, params.w1, params.varsigma, 0.3) : 1e9);
    large.push_back(b ? path_cost(*b, params.w1, params.varsigma, 0.3) : 1e9);
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  CHECK(large[10] <= small[10]);
}

TEST_CASE("two-robot roadmaps respect the passing order") {
  const auto params = default_params();
  const JointConfiguration start{{-5, 1.5}, {5, -1.5}}, goal{{5, 1.5}, {-5, -1.5}};
  for (const auto& strategy : game::enumerate_strategies(2)) {
    const Roadmap rm = build_roadmap(kEnv, strategy.order, 2, 5000, 3, params);
    const auto w = query_path(rm, start, goal, kEnv, params);
    REQUIRE(w.has_value());
    for (std::size_t i = 1; i < w->size(); ++i)
      CHECK(check_segment((*w)[i - 1], (*w)[i], kEnv).valid);
    const JointPath path = interpolate(*w, 1.0, 0.0);
    for (double t = 0.0; t <= path.end_time(); t += 0.05) {
      const auto a = path.state(0, t), b = path.state(1, t);
      CHECK(a.v.norm() <= 1.0 + 1e-9);
      CHECK(b.v.norm() <= 1.0 + 1e-9);
    }
    const auto first = crossing_times(path, static_cast<std::size_t>(strategy.order[0]), kEnv, 0.01);
    const auto second = crossing_times(path, static_cast<std::size_t>(strategy.order[1]), kEnv, 0.01);
    REQUIRE(first.has_value());
    REQUIRE(second.has_value());
    CHECK(first->exit <= second->entry);
  }
}

TEST_CASE("query recovers when both robots are inside the corridor") {
  const auto params = default_params();
  const JointConfiguration start{{-1.0, 0.0}, {1.0, 0.0}}, goal{{5, 1.5}, {-5, -1.5}};
  for (const auto& strategy : game::enumerate_strategies(2)) {
    const Roadmap rm = build_roadmap(kEnv, strategy.order, 2, 5000, 3, params);
    const auto w = query_path(rm, start, goal, kEnv, params);
    REQUIRE(w.has_value());
    const JointPath path = interpolate(*w, 1.0, 0.0);
    const std::size_t yielding = static_cast<std::size_t>(strategy.order[1]);
    // The yielding robot backs out before the other one leaves the corridor.
    const auto first = crossing_times(path, static_cast<std::size_t>(strategy.order[0]), kEnv, 0.01);
    const auto second = crossing_times(path, yielding, kEnv, 0.01);
    REQUIRE(first.has_value());
    REQUIRE(second.has_value());
    // The yielding robot is out of the corridor while the other one is inside
    // after the start, and only re-enters once the first has left.
    CHECK(second->exit >= first->exit);
    CHECK(kEnv.side_of(path.state(yielding, path.end_time()).p) == kEnv.side_of(goal[yielding]));
  }
}

TEST_CASE("roadmap cache") {
  PlannerParams params;
  params.budgets = {300, 400};
  const auto dir = temp_dir("cache");
  {
    RoadmapStore store(kEnv, params, dir);
    CHECK(store.prepare(2) == 2);
  }
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    (void)entry;
    ++files;
  }
  CHECK(files == 2);
  {
    RoadmapStore store(kEnv, params, dir);
    CHECK(store.prepare(2) == 0);
    const std::vector<int> order{1, 0};
    const Roadmap& rm = store.get(2, order);
    const Roadmap fresh = build_roadmap(kEnv, order, 2, 400, store.seed_for(2, order), params);
    CHECK(rm.coords == fresh.coords);
    CHECK(rm.targets == fresh.targets);
  }
  {
    RoadmapStore store(kEnv, params, dir);
    const std::vector<int> order{0, 1};
    const auto file = store.cache_file(2, order);
    std::filesystem::resize_file(file, std::filesystem::file_size(file) / 2);
    CHECK(store.prepare(2) == 1);
    CHECK_NOTHROW(load_roadmap(file));
  }
  {
    RoadmapStore store(kEnv, params, temp_dir("cache_empty"), false);
    const std::vector<int> order{0, 1};
    CHECK_THROWS_AS(store.get(2, order), PlanningFailure);
  }
  std::filesystem::remove_all(dir);
}
