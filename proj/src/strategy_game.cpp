#include "nodnav/strategy_game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nodnav::game {

std::string Strategy::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(order[i] + 1);
  }
  return s + ")";
}

bool GamePlayerSet::contains(int k) const {
  return std::binary_search(players.begin(), players.end(), k);
}

std::vector<Strategy> enumerate_strategies(int n_robots) {
  if (n_robots < 1 || n_robots > 6)
    throw CapacityError("enumerate_strategies: robot count " + std::to_string(n_robots) +
                        " outside [1, 6]");
  std::vector<int> perm(static_cast<std::size_t>(n_robots));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Strategy> out;
  do {
    out.push_back({perm});
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::size_t strategy_index(std::span<const int> order) {
  // Lehmer code.
  std::size_t index = 0;
  const std::size_t n = order.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t smaller = 0;
    for (std::size_t j = i + 1; j < n; ++j)
      if (order[j] < order[i]) ++smaller;
    index = index * (n - i) + smaller;
  }
  return index;
}

std::vector<int> restrict_order(const Strategy& order, std::span<const int> members) {
  std::vector<int> out;
  out.reserve(members.size());
  for (int r : order.order)
    if (std::find(members.begin(), members.end(), r) != members.end()) out.push_back(r);
  return out;
}

double corridor_distance(const Vec2& p, Side side, const ConflictParams& params) {
  switch (side) {
    case Side::Inside: return 0.0;
    case Side::Left: return distance(p, params.entrance_left);
    case Side::Right: return distance(p, params.entrance_right);
  }
  return 0.0;
}

double conflict_likelihood(double d_ij, double d_i_cor, double d_j_cor, double delta) {
  return 1.0 / (d_ij + delta) + 1.0 / (d_i_cor + d_j_cor + delta);
}

std::vector<double> conflict_scores(int owner, std::span<const Vec2> positions,
                                    const Environment& env, const ConflictParams& params) {
  const auto& pi = positions[static_cast<std::size_t>(owner)];
  const double di = corridor_distance(pi, env.side_of(pi), params);
  std::vector<double> scores(positions.size(), 0.0);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (static_cast<int>(k) == owner) continue;
    const auto& pk = positions[k];
    const double dk = corridor_distance(pk, env.side_of(pk), params);
    scores[k] = conflict_likelihood(distance(pi, pk), di, dk, params.delta);
  }
  return scores;
}

GamePlayerSet select_game_players(int owner, std::span<const double> scores, int k) {
  GamePlayerSet set;
  set.owner = owner;
  std::vector<int> others;
  for (int r = 0; r < static_cast<int>(scores.size()); ++r)
    if (r != owner) others.push_back(r);
  const auto take = static_cast<std::size_t>(std::clamp(k, 0, static_cast<int>(others.size())));
  // The objective is additive over members, so the best subset is the top-k.
  std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  set.players.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(set.players.begin(), set.players.end());
  return set;
}

nod::AdjacencyMask build_adjacency(int owner, const GamePlayerSet& players,
                                   std::span<const Strategy> strategies, bool reduced) {
  const std::size_t ns = strategies.size();
  const std::size_t nr = ns ? strategies.front().order.size() : 0;
  nod::AdjacencyMask mask(nr, ns);
  if (!reduced) {
    for (std::size_t k = 0; k < nr; ++k) {
      if (static_cast<int>(k) == owner) continue;
      for (std::size_t j = 0; j < ns; ++j) mask.at(k, j, j) = 1;
    }
    return mask;
  }
  std::vector<int> members{owner};
  members.insert(members.end(), players.players.begin(), players.players.end());
  std::vector<std::vector<int>> restricted(ns);
  for (std::size_t j = 0; j < ns; ++j) restricted[j] = restrict_order(strategies[j], members);
  for (int k : players.players) {
    for (std::size_t j = 0; j < ns; ++j)
      for (std::size_t l = 0; l < ns; ++l)
        if (restricted[j] == restricted[l]) mask.at(static_cast<std::size_t>(k), j, l) = 1;
  }
  return mask;
}

double order_likelihood(const Strategy& order, std::span<const double> corridor_distances) {
  const std::size_t n = order.order.size();
  if (corridor_distances.size() != n)
    throw std::invalid_argument("order_likelihood: one distance per robot required");
  // Shift by the minimum distance; the ratios are unchanged and exp stays bounded.
  const double shift = *std::min_element(corridor_distances.begin(), corridor_distances.end());
  auto weight = [&](int robot) {
    return std::exp(-(corridor_distances[static_cast<std::size_t>(robot)] - shift));
  };
  double product = 1.0;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    double denom = 0.0;
    for (std::size_t k = l; k < n; ++k) denom += weight(order.order[k]);
    product *= weight(order.order[l]) / denom;
  }
  return product;
}

std::vector<double> distance_based_initial_opinion(std::span<const Strategy> strategies,
                                                   std::span<const double> corridor_distances,
                                                   double K2, bool k2_outside) {
  if (!(K2 > 0.0)) throw std::invalid_argument("distance_based_initial_opinion: K2 must be positive");
  std::vector<double> z(strategies.size());
  for (std::size_t j = 0; j < strategies.size(); ++j) {
    const std::size_t n = strategies[j].order.size();
    const double lik = order_likelihood(strategies[j], corridor_distances);
    const double scale = k2_outside ? K2 : std::pow(K2, static_cast<double>(n > 0 ? n - 1 : 0));
    z[j] = scale * lik;
  }
  return z;
}

}  // namespace nodnav::game
