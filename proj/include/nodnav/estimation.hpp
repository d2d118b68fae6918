#pragma once

// Social-term estimation: how well another robot's recent motion matches the
// motion each strategy predicted for it.

#include <span>
#include <vector>

#include "nodnav/geometry.hpp"
#include "nodnav/nod_core.hpp"

namespace nodnav::estimation {

/// Time-ordered samples of one robot's state.
struct PathWindow {
  std::vector<double> times;
  std::vector<RobotState> states;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

/// -K1 times the trapezoidal integral of |dp|^2 + |dv|^2 over the common grid.
double raw_strategy_opinion(const PathWindow& observed, const PathWindow& predicted, double K1);

/// Fills row k of `social` with R(a[k][j][l] * rel[l]), rel = relative_opinion(raw).
void estimate_social_terms(std::span<const double> raw, const nod::AdjacencyMask& mask,
                           std::size_t k, nod::SocialTermMatrix& social);

}  // namespace nodnav::estimation
