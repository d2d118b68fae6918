#pragma once

// Passing-order strategies and the game-reduction machinery: conflict
// likelihood, game-player selection, adjacency weights and distance-based
// initial opinions.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodnav/environment.hpp"
#include "nodnav/nod_core.hpp"

namespace nodnav::game {

/// Corridor passing order; entries are 0-based robot indices.
struct Strategy {
  std::vector<int> order;

  bool operator==(const Strategy&) const = default;
  /// 1-based rendering, e.g. "(2,1,3)".
  std::string to_string() const;
};

class CapacityError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct ConflictParams {
  double delta = 1.0;
  Vec2 entrance_left{-3.0, 0.0};
  Vec2 entrance_right{3.0, 0.0};
};

struct GamePlayerSet {
  int owner = 0;
  std::vector<int> players;  // ascending robot indices
  bool contains(int k) const;
};

/// All n! orders of {0..n-1} in lexicographic order; 1 <= n <= 6.
std::vector<Strategy> enumerate_strategies(int n_robots);

/// Lexicographic rank of a permutation of {0..n-1}.
std::size_t strategy_index(std::span<const int> order);

/// Subsequence of `order` made of the robots in `members`.
std::vector<int> restrict_order(const Strategy& order, std::span<const int> members);

/// Distance from p to the entrance of its side; zero inside the corridor.
double corridor_distance(const Vec2& p, Side side, const ConflictParams& params);

/// 1/(d_ij + delta) + 1/(d_i + d_j + delta).
double conflict_likelihood(double d_ij, double d_i_cor, double d_j_cor, double delta);

/// Conflict likelihood of `owner` against every robot; the owner's own entry is 0.
std::vector<double> conflict_scores(int owner, std::span<const Vec2> positions,
                                    const Environment& env, const ConflictParams& params);

/// The k robots with the highest scores (ties to the lowest index); k clamps to N_r - 1.
GamePlayerSet select_game_players(int owner, std::span<const double> scores, int k);

/// Adjacency weights for `owner`. All-to-all (reduced = false) enables j == l for
/// every other robot; reduced enables (k, j, l) for game players k whenever j and l
/// restrict to the same order over {owner} and the players.
nod::AdjacencyMask build_adjacency(int owner, const GamePlayerSet& players,
                                   std::span<const Strategy> strategies, bool reduced);

/// Product over positions l < N_r of exp(-d_{i_l}) / sum_{k >= l} exp(-d_{i_k}).
double order_likelihood(const Strategy& order, std::span<const double> corridor_distances);

/// z[j] = prod_l K2 * L(i_l | i_1..i_{l-1}); with k2_outside, K2 * prod_l L instead.
std::vector<double> distance_based_initial_opinion(std::span<const Strategy> strategies,
                                                   std::span<const double> corridor_distances,
                                                   double K2, bool k2_outside = false);

}  // namespace nodnav::game
