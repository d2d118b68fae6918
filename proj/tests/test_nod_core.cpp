#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nodnav/nod_core.hpp"

using namespace nodnav;
using namespace nodnav::nod;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

AdjacencyMask diagonal_mask(std::size_t robots, std::size_t strategies, std::size_t owner) {
  AdjacencyMask m(robots, strategies);
  for (std::size_t k = 0; k < robots; ++k)
    if (k != owner)
      for (std::size_t j = 0; j < strategies; ++j) m.at(k, j, j) = 1;
  return m;
}

}  // namespace

TEST_CASE("relative opinion subtracts the mean") {
  CHECK(relative_opinion(std::vector{5.0, 5.0, 5.0}) == std::vector{0.0, 0.0, 0.0});
  CHECK(relative_opinion(std::vector{2.0, 0.0}) == std::vector{1.0, -1.0});
  CHECK(relative_opinion(std::vector{3.0, 1.0, -1.0}) == std::vector{2.0, 0.0, -2.0});
  CHECK_THROWS_AS(relative_opinion(std::vector<double>{}), std::invalid_argument);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_vector(rng, 1 + rng() % 24, std::pow(10.0, trial % 7));
    const auto r = relative_opinion(z);
    double top = 0.0;
    for (double v : z) top = std::max(top, std::abs(v));
    CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0)) <= 1e-9 * top);
  }
}

TEST_CASE("saturation") {
  CHECK(saturate(0.0) == 0.5);
  // (tanh(1) + 1) / 2 == 1 / (1 + e^-2), evaluated in extended precision.
  const long double oracle = 1.0L / (1.0L + std::exp(-2.0L));
  CHECK(saturate(1.0) == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-15));
  for (double x : {0.1, 0.7, 2.5, 9.0}) {
    CHECK(saturate(x) + saturate(-x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(saturate(x) > saturate(x - 0.05));
  }
}

TEST_CASE("softmax") {
  const auto uniform = softmax(std::vector<double>(6, 0.0), 0.3);
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 6.0));

  const auto p = softmax(std::vector{std::log(2.0), 0.0}, 1.0);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto z = random_vector(rng, 2 + rng() % 23, trial < 150 ? 10.0 : 1e6);
    const double eta = 0.1 + uniform01(rng);
    const auto probs = softmax(z, eta);
    double total = 0.0;
    for (double v : probs) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    if (trial < 150) {
      std::vector<double> shifted = z;
      for (double& v : shifted) v += 37.5;
      const auto q = softmax(shifted, eta);
      for (std::size_t j = 0; j < z.size(); ++j) CHECK(q[j] == doctest::Approx(probs[j]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(softmax(std::vector{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("softmax selection frequencies follow the probabilities") {
  Rng rng(99);
  const std::vector<double> z{1.0, 0.0, -0.5};
  const auto p = softmax(z, 1.0);
  std::vector<int> counts(3, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++counts[softmax_select(z, 1.0, rng).chosen];
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(static_cast<double>(counts[j]) / draws == doctest::Approx(p[j]).epsilon(0.03));
}

TEST_CASE("step size") {
  CHECK(step_size(0, 0.05) == 1.0);
  CHECK(step_size(19, 0.05) == 0.05);
  CHECK(step_size(1000, 0.05) == 0.05);
  CHECK(step_size(1, 0.05) == 0.5);
}

TEST_CASE("discrete update") {
  NodParams params;
  params.u = 10.0;
  SocialTermMatrix social(2, 2);
  social.at(1, 0, 0) = 0.9;
  social.at(1, 1, 1) = 0.1;
  const auto mask = diagonal_mask(2, 2, 0);
  const auto z = discrete_nod_update(std::vector{0.0, 0.0}, social, mask, params, 1);
  CHECK(z[0] == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("alpha = 1 replaces the opinion") {
    const auto full = discrete_nod_update(std::vector{123.0, -7.0}, social, mask, params, 0);
    CHECK(full[0] == doctest::Approx(9.0));
    CHECK(full[1] == doctest::Approx(1.0));
  }
  SUBCASE("fixed point") {
    params.b = {0.25, -1.0};
    const std::vector<double> fixed{10.0 * 0.9 + 0.25, 10.0 * 0.1 - 1.0};
    for (std::uint64_t t : {0ULL, 1ULL, 7ULL, 500ULL}) {
      const auto next = discrete_nod_update(fixed, social, mask, params, t);
      CHECK(next[0] == doctest::Approx(fixed[0]).epsilon(1e-15));
      CHECK(next[1] == doctest::Approx(fixed[1]).epsilon(1e-15));
    }
  }
  SUBCASE("half-constant mode adds 0.5 for masked pairs of active robots") {
    const auto z2 = discrete_nod_update(std::vector{0.0, 0.0}, social, mask, params, 0,
                                        MaskedTermMode::HalfConstant);
    CHECK(z2[0] == doctest::Approx(10.0 * (0.9 + 0.5)));
    CHECK(z2[1] == doctest::Approx(10.0 * (0.1 + 0.5)));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(discrete_nod_update(std::vector{0.0, 0.0, 0.0}, social, mask, params, 1),
                    std::invalid_argument);
    AdjacencyMask wrong(3, 2);
    CHECK_THROWS_AS(discrete_nod_update(std::vector{0.0, 0.0}, social, wrong, params, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("discrete update is equivariant under strategy relabelling") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ns = 6, nr = 3;
    std::vector<std::size_t> perm(ns);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = ns - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);

    NodParams params;
    params.b = random_vector(rng, ns, 3.0);
    const auto z = random_vector(rng, ns, 20.0);
    SocialTermMatrix social(nr, ns);
    for (double& v : social.r) v = uniform01(rng);
    AdjacencyMask mask(nr, ns);
    for (std::size_t k = 1; k < nr; ++k)
      for (std::size_t j = 0; j < ns; ++j)
        for (std::size_t l = 0; l < ns; ++l) mask.at(k, j, l) = (rng() % 3 == 0);

    NodParams pp = params;
    std::vector<double> zp(ns);
    SocialTermMatrix sp(nr, ns);
    AdjacencyMask mp(nr, ns);
    for (std::size_t j = 0; j < ns; ++j) {
      zp[perm[j]] = z[j];
      pp.b[perm[j]] = params.b[j];
      for (std::size_t k = 0; k < nr; ++k)
        for (std::size_t l = 0; l < ns; ++l) {
          sp.at(k, perm[j], perm[l]) = social.at(k, j, l);
          mp.at(k, perm[j], perm[l]) = mask.at(k, j, l);
        }
    }
    const auto out = discrete_nod_update(z, social, mask, params, 2);
    const auto outp = discrete_nod_update(zp, sp, mp, pp, 2);
    const auto prob = softmax(z, 1.0);
    const auto probp = softmax(zp, 1.0);
    const auto rel = relative_opinion(z);
    const auto relp = relative_opinion(zp);
    for (std::size_t j = 0; j < ns; ++j) {
      CHECK(outp[perm[j]] == doctest::Approx(out[j]).epsilon(1e-12));
      CHECK(probp[perm[j]] == doctest::Approx(prob[j]).epsilon(1e-12));
      CHECK(relp[perm[j]] == doctest::Approx(rel[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("continuous dynamics") {
  SUBCASE("no attention and no bias decays to zero") {
    std::vector<NodParams> params(2);
    for (auto& p : params) p.u = 0.0;
    const auto z = continuous_nod_integrate({{4.0, -2.0}, {1.0, 3.0}}, params, 0.01, 20.0);
    for (const auto& zi : z)
      for (double v : zi) CHECK(std::abs(v) < 1e-7);
  }
  SUBCASE("shared preference becomes consensus") {
    std::vector<NodParams> params(2);
    for (auto& p : params) p.u = 10.0;
    const auto z = continuous_nod_integrate({{10.0, 0.0}, {10.0, 0.0}}, params, 0.01, 50.0);
    for (const auto& zi : z) {
      CHECK(relative_opinion(zi)[0] > 0.0);
      CHECK(softmax(zi, 1.0)[0] > 0.99);
    }
  }
  SUBCASE("label swap permutes trajectories") {
    std::vector<NodParams> params(2);
    for (auto& p : params) {
      p.u = 3.0;
      p.b = {0.4, -0.1};
    }
    auto swapped = params;
    for (auto& p : swapped) std::swap(p.b[0], p.b[1]);
    const auto a = continuous_nod_integrate({{2.0, -1.0}, {0.5, 1.5}}, params, 0.01, 7.0);
    const auto b = continuous_nod_integrate({{-1.0, 2.0}, {1.5, 0.5}}, swapped, 0.01, 7.0);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(b[i][0] == doctest::Approx(a[i][1]).epsilon(1e-12));
      CHECK(b[i][1] == doctest::Approx(a[i][0]).epsilon(1e-12));
    }
  }
  SUBCASE("first-order convergence in dt") {
    std::vector<NodParams> params(2);
    for (auto& p : params) p.u = 2.0;
    const std::vector<OpinionState> z0{{1.0, -0.5}, {0.2, 0.4}};
    const auto coarse = continuous_nod_integrate(z0, params, 0.01, 3.0);
    const auto fine = continuous_nod_integrate(z0, params, 0.005, 3.0);
    const auto finest = continuous_nod_integrate(z0, params, 0.0025, 3.0);
    const double e1 = std::abs(coarse[0][0] - fine[0][0]);
    const double e2 = std::abs(fine[0][0] - finest[0][0]);
    CHECK(e1 > 0.0);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
  }
  SUBCASE("mirrored robots reach equal selection probabilities") {
    std::vector<NodParams> params(2);
    for (auto& p : params) p.u = 10.0;
    for (double a : {-8.0, -2.0, 0.5, 6.0}) {
      // Robot 2 holds robot 1's opinion with the strategies exchanged, so the
      // pair is symmetric under swapping both robots and strategy labels.
      const auto s = integrate_to_steady_state({{a, 0.0}, {0.0, a}}, params, 0.01);
      const double x11 = softmax(s.z[0], 1.0)[0];
      const double x22 = softmax(s.z[1], 1.0)[1];
      CHECK(std::abs(x11 - x22) < 1e-6);
    }
  }
  SUBCASE("input validation") {
    std::vector<NodParams> params(2);
    CHECK_THROWS_AS(continuous_nod_integrate({{1.0, 0.0}, {1.0}}, params, 0.01, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(continuous_nod_integrate({{1.0, 0.0}, {1.0, 0.0}}, params, 0.02, 1.0),
                    std::invalid_argument);
    std::vector<NodParams> one(1);
    CHECK_THROWS_AS(continuous_nod_integrate({{1.0, 0.0}, {1.0, 0.0}}, one, 0.01, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("parameter validation") {
  NodParams p;
  CHECK_NOTHROW(p.validate(2));
  p.h = 0.0;
  CHECK_THROWS_AS(p.validate(2), std::invalid_argument);
  p.h = 0.05;
  p.b = {1.0};
  CHECK_THROWS_AS(p.validate(2), std::invalid_argument);
  p.b.clear();
  p.eta = -1.0;
  CHECK_THROWS_AS(p.validate(2), std::invalid_argument);
}
