#include "nodnav/estimation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nodnav::estimation {

void PathWindow::validate() const {
  if (times.size() != states.size())
    throw std::invalid_argument("PathWindow: times and states differ in length");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("PathWindow: times must be strictly increasing");
}

double raw_strategy_opinion(const PathWindow& observed, const PathWindow& predicted, double K1) {
  if (!(K1 > 0.0)) throw std::invalid_argument("raw_strategy_opinion: K1 must be positive");
  observed.validate();
  predicted.validate();
  if (observed.size() < 2 || observed.size() != predicted.size())
    throw std::invalid_argument("raw_strategy_opinion: windows must share a grid of >= 2 samples");
  const double period = observed.times[1] - observed.times[0];
  for (std::size_t i = 0; i < observed.size(); ++i)
    if (std::abs(observed.times[i] - predicted.times[i]) > period)
      throw std::invalid_argument("raw_strategy_opinion: windows disagree at sample " +
                                  std::to_string(i));

  auto deviation = [&](std::size_t i) {
    const RobotState& a = observed.states[i];
    const RobotState& b = predicted.states[i];
    return (a.p - b.p).squaredNorm() + (a.v - b.v).squaredNorm();
  };
  double integral = 0.0;
  for (std::size_t i = 1; i < observed.size(); ++i)
    integral += 0.5 * (deviation(i - 1) + deviation(i)) * (observed.times[i] - observed.times[i - 1]);
  return -K1 * integral;
}

void estimate_social_terms(std::span<const double> raw, const nod::AdjacencyMask& mask,
                           std::size_t k, nod::SocialTermMatrix& social) {
  const std::size_t ns = social.strategies;
  if (raw.size() != ns || mask.strategies != ns || mask.robots != social.robots || k >= social.robots)
    throw std::invalid_argument("estimate_social_terms: dimension mismatch");
  const auto rel = nod::relative_opinion(raw);
  for (std::size_t j = 0; j < ns; ++j)
    for (std::size_t l = 0; l < ns; ++l)
      social.at(k, j, l) = nod::saturate(mask.at(k, j, l) * rel[l]);
}

}  // namespace nodnav::estimation
