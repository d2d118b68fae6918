#include "nodnav/nod_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace nodnav::nod {

void NodParams::validate(std::size_t n_strategies) const {
  if (!(d > 0.0)) throw std::invalid_argument("nod: d must be positive");
  if (!(u >= 0.0)) throw std::invalid_argument("nod: u must be nonnegative");
  if (!(eta > 0.0)) throw std::invalid_argument("nod: eta must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("nod: T must be positive");
  if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("nod: h must lie in (0, 1]");
  if (!b.empty() && b.size() != n_strategies)
    throw std::invalid_argument("nod: bias length " + std::to_string(b.size()) +
                                " does not match strategy count " +
                                std::to_string(n_strategies));
}

bool AdjacencyMask::rowActive(std::size_t k) const {
  const std::size_t block = strategies * strategies;
  const auto first = a.begin() + static_cast<std::ptrdiff_t>(k * block);
  return std::any_of(first, first + static_cast<std::ptrdiff_t>(block),
                     [](std::uint8_t v) { return v != 0; });
}

std::vector<double> relative_opinion(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("relative_opinion: empty opinion vector");
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  std::vector<double> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [mean](double v) { return v - mean; });
  return out;
}

double saturate(double x) { return 0.5 * (std::tanh(x) + 1.0); }

std::vector<double> softmax(std::span<const double> z, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("softmax: eta must be positive");
  if (z.empty()) return {};
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    p[j] = std::exp((z[j] - top) / eta);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

Selection softmax_select(std::span<const double> z, double eta, Rng& rng) {
  Selection s;
  s.probabilities = softmax(z, eta);
  const double draw = uniform01(rng);
  double cumulative = 0.0;
  s.chosen = s.probabilities.size() - 1;
  for (std::size_t j = 0; j < s.probabilities.size(); ++j) {
    cumulative += s.probabilities[j];
    if (draw < cumulative) {
      s.chosen = j;
      break;
    }
  }
  return s;
}

double step_size(std::uint64_t t_index, double h) {
  return std::max(1.0 / (static_cast<double>(t_index) + 1.0), h);
}

std::vector<double> social_sum(const SocialTermMatrix& social, const AdjacencyMask& mask,
                               MaskedTermMode mode) {
  if (social.robots != mask.robots || social.strategies != mask.strategies ||
      social.r.size() != mask.a.size())
    throw std::invalid_argument("social_sum: social term and mask dimensions differ");
  const std::size_t ns = social.strategies;
  std::vector<double> sum(ns, 0.0);
  for (std::size_t k = 0; k < social.robots; ++k) {
    if (!mask.rowActive(k)) continue;
    for (std::size_t j = 0; j < ns; ++j) {
      for (std::size_t l = 0; l < ns; ++l) {
        if (mask.at(k, j, l))
          sum[j] += social.at(k, j, l);
        else if (mode == MaskedTermMode::HalfConstant)
          sum[j] += 0.5;
      }
    }
  }
  return sum;
}

OpinionState discrete_nod_update(std::span<const double> z, const SocialTermMatrix& social,
                                 const AdjacencyMask& mask, const NodParams& params,
                                 std::uint64_t t_index, MaskedTermMode mode) {
  if (z.size() != social.strategies)
    throw std::invalid_argument("discrete_nod_update: opinion length " +
                                std::to_string(z.size()) + " does not match " +
                                std::to_string(social.strategies) + " strategies");
  params.validate(z.size());
  const std::vector<double> s = social_sum(social, mask, mode);
  const double alpha = step_size(t_index, params.h);
  OpinionState out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j)
    out[j] = z[j] - alpha * params.d * (z[j] - params.u * s[j] - params.bias(j));
  return out;
}

std::vector<OpinionState> continuous_nod_rhs(const std::vector<OpinionState>& z,
                                             const std::vector<NodParams>& params) {
  const std::size_t nr = z.size();
  std::vector<OpinionState> rel(nr);
  for (std::size_t i = 0; i < nr; ++i) rel[i] = relative_opinion(z[i]);
  std::vector<OpinionState> dz(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    const std::size_t ns = z[i].size();
    dz[i].assign(ns, 0.0);
    for (std::size_t j = 0; j < ns; ++j) {
      double social = 0.0;
      for (std::size_t k = 0; k < nr; ++k)
        if (k != i) social += saturate(rel[k][j]);
      dz[i][j] = -params[i].d * (z[i][j] - params[i].u * social - params[i].bias(j));
    }
  }
  return dz;
}

namespace {

void check_continuous_inputs(const std::vector<OpinionState>& z0,
                             const std::vector<NodParams>& params, double dt) {
  if (z0.empty()) throw std::invalid_argument("continuous_nod: no robots");
  if (params.size() != z0.size())
    throw std::invalid_argument("continuous_nod: one parameter set per robot required");
  const std::size_t ns = z0.front().size();
  double min_tau = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (z0[i].size() != ns)
      throw std::invalid_argument("continuous_nod: robots must share the strategy count");
    params[i].validate(ns);
    min_tau = std::min(min_tau, 1.0 / params[i].d);
  }
  if (!(dt > 0.0) || dt > 0.01 * min_tau * (1.0 + 1e-12))
    throw std::invalid_argument("continuous_nod: dt must satisfy 0 < dt <= 0.01 min(1/d)");
}

// Returns max |dz/dt| of the step just taken.
double euler_step(std::vector<OpinionState>& z, const std::vector<NodParams>& params,
                  double dt) {
  const auto dz = continuous_nod_rhs(z, params);
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < z[i].size(); ++j) {
      z[i][j] += dt * dz[i][j];
      if (!std::isfinite(z[i][j])) throw NodDivergence("continuous_nod: non-finite opinion");
      worst = std::max(worst, std::abs(dz[i][j]));
    }
  }
  return worst;
}

}  // namespace

std::vector<OpinionState> continuous_nod_integrate(std::vector<OpinionState> z0,
                                                   const std::vector<NodParams>& params,
                                                   double dt, double t_end) {
  check_continuous_inputs(z0, params, dt);
  const auto steps = static_cast<std::uint64_t>(std::llround(t_end / dt));
  for (std::uint64_t s = 0; s < steps; ++s) euler_step(z0, params, dt);
  return z0;
}

SteadyState integrate_to_steady_state(std::vector<OpinionState> z0,
                                      const std::vector<NodParams>& params, double dt,
                                      double t_max, double tol) {
  check_continuous_inputs(z0, params, dt);
  SteadyState out;
  const auto steps = static_cast<std::uint64_t>(std::llround(t_max / dt));
  for (std::uint64_t s = 0; s < steps; ++s) {
    const double rate = euler_step(z0, params, dt);
    out.t = static_cast<double>(s + 1) * dt;
    if (rate < tol) {
      out.converged = true;
      break;
    }
  }
  out.z = std::move(z0);
  return out;
}

}  // namespace nodnav::nod
