#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "nodnav/strategy_game.hpp"

using namespace nodnav;
using namespace nodnav::game;

namespace {

// Exhaustive maximizer of the summed conflict likelihood over all size-k
// subsets, ties resolved by the lexicographically smallest sorted subset.
std::vector<int> brute_force_players(int owner, const std::vector<double>& scores, int k) {
  std::vector<int> others;
  for (int r = 0; r < static_cast<int>(scores.size()); ++r)
    if (r != owner) others.push_back(r);
  k = std::min<int>(k, static_cast<int>(others.size()));
  std::vector<int> best;
  double best_sum = -1.0;
  const int n = static_cast<int>(others.size());
  for (unsigned subset = 0; subset < (1U << n); ++subset) {
    if (std::popcount(subset) != k) continue;
    std::vector<int> members;
    double sum = 0.0;
    for (int b = 0; b < n; ++b)
      if (subset & (1U << b)) {
        members.push_back(others[static_cast<std::size_t>(b)]);
        sum += scores[static_cast<std::size_t>(others[static_cast<std::size_t>(b)])];
      }
    if (sum > best_sum || (sum == best_sum && members < best)) {
      best_sum = sum;
      best = members;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("strategy enumeration") {
  const auto two = enumerate_strategies(2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].order == std::vector{0, 1});
  CHECK(two[1].order == std::vector{1, 0});
  const auto three = enumerate_strategies(3);
  REQUIRE(three.size() == 6);
  CHECK(three.front().to_string() == "(1,2,3)");
  CHECK(three[2].to_string() == "(2,1,3)");
  CHECK(three[3].to_string() == "(2,3,1)");
  CHECK(three.back().to_string() == "(3,2,1)");
  CHECK(enumerate_strategies(1).size() == 1);
  CHECK(enumerate_strategies(6).size() == 720);
  CHECK_THROWS_AS(enumerate_strategies(0), CapacityError);
  CHECK_THROWS_AS(enumerate_strategies(7), CapacityError);
  for (std::size_t i = 0; i < three.size(); ++i) CHECK(strategy_index(three[i].order) == i);
  const auto five = enumerate_strategies(5);
  for (std::size_t i = 0; i < five.size(); ++i) CHECK(strategy_index(five[i].order) == i);
}

TEST_CASE("corridor distance") {
  const ConflictParams params;
  CHECK(corridor_distance({-3.0, 0.0}, Side::Left, params) == 0.0);
  CHECK(corridor_distance({-6.0, 4.0}, Side::Left, params) == doctest::Approx(5.0));
  CHECK(corridor_distance({0.0, 0.0}, Side::Inside, params) == 0.0);
  CHECK(corridor_distance({7.0, -3.0}, Side::Right, params) == doctest::Approx(5.0));
}

TEST_CASE("conflict likelihood") {
  CHECK(conflict_likelihood(0, 0, 0, 1.0) == 2.0);
  CHECK(conflict_likelihood(1, 2, 3, 1.0) == doctest::Approx(1.0 / 2.0 + 1.0 / 6.0));
  nodnav::Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const double a = 10 * uniform01(rng), b = 10 * uniform01(rng), c = 10 * uniform01(rng);
    const double delta = 0.1 + uniform01(rng);
    const double v = conflict_likelihood(a, b, c, delta);
    CHECK(v > 0.0);
    CHECK(v <= 2.0 / delta);
    CHECK(conflict_likelihood(a + 0.5, b, c, delta) < v);
    CHECK(conflict_likelihood(a, b + 0.5, c, delta) < v);
    CHECK(conflict_likelihood(a, b, c + 0.5, delta) < v);
  }
}

TEST_CASE("game player selection") {
  // Robots 2, 3, 4 are indices 1, 2, 3; the owner is index 0.
  CHECK(select_game_players(0, std::vector{0.0, 0.8, 1.4, 0.9}, 2).players == std::vector{2, 3});
  CHECK(select_game_players(0, std::vector{0.0, 1.0, 1.0}, 1).players == std::vector{1});
  CHECK(select_game_players(1, std::vector{0.3, 0.0, 0.2}, 5).players == std::vector{0, 2});
  CHECK(select_game_players(1, std::vector{0.3, 0.0, 0.2}, 0).players.empty());

  nodnav::Rng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const int nr = 2 + static_cast<int>(rng() % 4);
    const int owner = static_cast<int>(rng() % static_cast<unsigned>(nr));
    const int k = static_cast<int>(rng() % 5);
    std::vector<double> scores(static_cast<std::size_t>(nr));
    for (double& s : scores) s = (rng() % 4 == 0) ? 0.5 : uniform01(rng);  // force ties
    scores[static_cast<std::size_t>(owner)] = 0.0;
    const auto got = select_game_players(owner, scores, k);
    CHECK(got.players == brute_force_players(owner, scores, k));
    CHECK(!got.contains(owner));
    CHECK(got.players.size() == static_cast<std::size_t>(std::min(k, nr - 1)));
  }
}

TEST_CASE("adjacency construction") {
  const auto s2 = enumerate_strategies(2);
  const auto all2 = build_adjacency(0, {0, {1}}, s2, false);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t l = 0; l < 2; ++l) {
      CHECK(all2.at(1, j, l) == (j == l ? 1 : 0));
      CHECK(all2.at(0, j, l) == 0);
    }

  const auto s3 = enumerate_strategies(3);
  const auto reduced = build_adjacency(0, {0, {1}}, s3, true);
  // (1,2,3) and (1,3,2) both restrict to (1,2).
  CHECK(reduced.at(1, 0, 1) == 1);
  CHECK(reduced.at(1, 1, 0) == 1);
  // (1,2,3) vs (2,1,3) restrict to different orders.
  CHECK(reduced.at(1, 0, 2) == 0);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t l = 0; l < 6; ++l) {
      CHECK(reduced.at(2, j, l) == 0);
      CHECK(reduced.at(0, j, l) == 0);
      const auto rj = restrict_order(s3[j], std::vector{0, 1});
      const auto rl = restrict_order(s3[l], std::vector{0, 1});
      CHECK(reduced.at(1, j, l) == (rj == rl ? 1 : 0));
    }

  for (int nr = 2; nr <= 4; ++nr) {
    const auto strategies = enumerate_strategies(nr);
    for (int owner = 0; owner < nr; ++owner) {
      GamePlayerSet everyone{owner, {}};
      for (int r = 0; r < nr; ++r)
        if (r != owner) everyone.players.push_back(r);
      const auto full = build_adjacency(owner, everyone, strategies, true);
      const auto diag = build_adjacency(owner, everyone, strategies, false);
      CHECK(full.a == diag.a);
    }
  }
}

TEST_CASE("order likelihood") {
  const auto s2 = enumerate_strategies(2);
  CHECK(order_likelihood(s2[0], std::vector{2.0, 2.0}) == doctest::Approx(0.5));
  CHECK(order_likelihood(s2[0], std::vector{0.0, std::log(3.0)}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(order_likelihood(s2[0], std::vector{0.0}), std::invalid_argument);

  nodnav::Rng rng(41);
  for (int nr = 1; nr <= 4; ++nr) {
    const auto strategies = enumerate_strategies(nr);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> d(static_cast<std::size_t>(nr));
      for (double& v : d) v = 12.0 * uniform01(rng);
      double total = 0.0;
      for (const auto& s : strategies) total += order_likelihood(s, d);
      CHECK(std::abs(total - 1.0) <= 1e-9);
      std::vector<double> shifted = d;
      for (double& v : shifted) v += 4.25;
      for (const auto& s : strategies)
        CHECK(order_likelihood(s, shifted) == doctest::Approx(order_likelihood(s, d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("distance-based initial opinions") {
  const auto s2 = enumerate_strategies(2);
  const auto equal = distance_based_initial_opinion(s2, std::vector{3.0, 3.0}, 10.0);
  CHECK(equal[0] == doctest::Approx(5.0));
  CHECK(equal[1] == doctest::Approx(5.0));
  const auto skewed = distance_based_initial_opinion(s2, std::vector{0.0, std::log(3.0)}, 10.0);
  CHECK(skewed[0] == doctest::Approx(7.5));
  CHECK(skewed[1] == doctest::Approx(2.5));

  const auto s3 = enumerate_strategies(3);
  const auto z3 = distance_based_initial_opinion(s3, std::vector{2.0, 2.0, 2.0}, 10.0);
  for (double v : z3) CHECK(v == doctest::Approx(z3[0]));
  // Inside the product the scale is K2^(N-1); outside it is K2.
  CHECK(z3[0] == doctest::Approx(100.0 / 6.0));
  const auto outside = distance_based_initial_opinion(s3, std::vector{2.0, 2.0, 2.0}, 10.0, true);
  CHECK(outside[0] == doctest::Approx(10.0 / 6.0));
  CHECK_THROWS_AS(distance_based_initial_opinion(s3, std::vector{1.0, 1.0, 1.0}, 0.0),
                  std::invalid_argument);
}
