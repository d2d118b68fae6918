#pragma once

// Opinion-state mathematics: relative opinion, tanh saturation, softmax
// strategy selection, the stochastic-approximation update used by the live
// simulator and a forward-Euler integrator of the continuous dynamics.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace nodnav {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) drawn from the top 53 bits of one engine call.
/// Used instead of std::uniform_real_distribution so traces do not depend on
/// the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace nod {

using OpinionState = std::vector<double>;

struct NodParams {
  double d = 1.0;     // time constant
  double u = 100.0;   // attention
  std::vector<double> b;  // bias, one entry per strategy (empty means zero)
  double eta = 1.0;   // softmax temperature
  double T = 1.0;     // update period [s]
  double h = 0.05;    // step-size floor

  void validate(std::size_t n_strategies) const;
  double bias(std::size_t j) const { return b.empty() ? 0.0 : b[j]; }
};

/// How adjacency-masked (k, j, l) entries enter the social sum.
enum class MaskedTermMode {
  Omit,          // masked entries contribute nothing
  HalfConstant,  // masked entries of game players contribute R(0) = 0.5
};

/// Dense [robot][own strategy][other strategy] array of values in [0, 1].
/// Rows of robots that are not game players are ignored by the update.
struct SocialTermMatrix {
  std::size_t robots = 0;
  std::size_t strategies = 0;
  std::vector<double> r;

  SocialTermMatrix() = default;
  SocialTermMatrix(std::size_t n_robots, std::size_t n_strategies)
      : robots(n_robots), strategies(n_strategies),
        r(n_robots * n_strategies * n_strategies, 0.5) {}

  double& at(std::size_t k, std::size_t j, std::size_t l) {
    return r[(k * strategies + j) * strategies + l];
  }
  double at(std::size_t k, std::size_t j, std::size_t l) const {
    return r[(k * strategies + j) * strategies + l];
  }
};

/// Binary adjacency weights a[k][j][l]; zero for the owner and for robots
/// outside the game-player set.
struct AdjacencyMask {
  std::size_t robots = 0;
  std::size_t strategies = 0;
  std::vector<std::uint8_t> a;

  AdjacencyMask() = default;
  AdjacencyMask(std::size_t n_robots, std::size_t n_strategies)
      : robots(n_robots), strategies(n_strategies),
        a(n_robots * n_strategies * n_strategies, 0) {}

  std::uint8_t& at(std::size_t k, std::size_t j, std::size_t l) {
    return a[(k * strategies + j) * strategies + l];
  }
  std::uint8_t at(std::size_t k, std::size_t j, std::size_t l) const {
    return a[(k * strategies + j) * strategies + l];
  }
  /// True when any entry of robot k's block is enabled.
  bool rowActive(std::size_t k) const;
};

struct Selection {
  std::vector<double> probabilities;
  std::size_t chosen = 0;
};

class NodDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// z - mean(z).
std::vector<double> relative_opinion(std::span<const double> z);

/// R(x) = (tanh(x) + 1) / 2.
double saturate(double x);

/// Softmax with temperature eta, max-shifted.
std::vector<double> softmax(std::span<const double> z, double eta);

/// Softmax probabilities plus one index sampled from them.
Selection softmax_select(std::span<const double> z, double eta, Rng& rng);

/// max(1 / (t_index + 1), h).
double step_size(std::uint64_t t_index, double h);

/// Sum over enabled (k, l) of r[k][j][l] for each own strategy j.
std::vector<double> social_sum(const SocialTermMatrix& social, const AdjacencyMask& mask,
                               MaskedTermMode mode = MaskedTermMode::Omit);

/// One discrete update:
///   z'[j] = z[j] - alpha * d * (z[j] - u * S[j] - b[j]),  alpha = step_size(t_index, h).
OpinionState discrete_nod_update(std::span<const double> z, const SocialTermMatrix& social,
                                 const AdjacencyMask& mask, const NodParams& params,
                                 std::uint64_t t_index,
                                 MaskedTermMode mode = MaskedTermMode::Omit);

/// Right-hand side of the continuous all-to-all dynamics for every robot.
std::vector<OpinionState> continuous_nod_rhs(const std::vector<OpinionState>& z,
                                             const std::vector<NodParams>& params);

/// Forward-Euler integration of the continuous dynamics up to t_end.
std::vector<OpinionState> continuous_nod_integrate(std::vector<OpinionState> z0,
                                                   const std::vector<NodParams>& params,
                                                   double dt, double t_end);

struct SteadyState {
  std::vector<OpinionState> z;
  double t = 0.0;
  bool converged = false;
};

/// Integrates until max |dz/dt| < tol or t_max, whichever comes first.
SteadyState integrate_to_steady_state(std::vector<OpinionState> z0,
                                      const std::vector<NodParams>& params, double dt,
                                      double t_max = 200.0, double tol = 1e-6);

}  // namespace nod
}  // namespace nodnav
