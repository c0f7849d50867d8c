#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "ctsense/policy.hpp"
#include "support.hpp"

using namespace ctsense;
using namespace ctsense::testing;

TEST_CASE("threshold constants") {
  CHECK(threshold_constant(2) == doctest::Approx(7.858).epsilon(1e-4));
  CHECK(threshold_constant(5) == doctest::Approx(13.92).epsilon(1e-3));
  // v(1) = C, so beta(1, alpha) - C = w(alpha)
  CHECK(threshold(1, std::exp(-10.0), 5) - threshold_constant(5) == doctest::Approx(10.0 + std::sqrt(200.0)));
  CHECK(threshold(1000, 0.01, 5) > threshold(100, 0.01, 5));
  CHECK(threshold(100, 0.001, 5) > threshold(100, 0.01, 5));
  CHECK_THROWS_AS(threshold(0, 0.1, 2), DomainError);
  CHECK_THROWS_AS(threshold(10, 1.0, 2), DomainError);
}

TEST_CASE("exploration floor") {
  CHECK(exploration_eps(1, 5) == doctest::Approx(0.5 / std::sqrt(26.0)));
  CHECK(exploration_eps(1, 5) == doctest::Approx(0.09806).epsilon(1e-4));
  CHECK(exploration_eps(1, 2) <= 0.5);
}

TEST_CASE("eps projection") {
  const auto p = eps_project(std::vector<double>{0.98, 0.01, 0.01}, 0.05);
  CHECK(p[0] == doctest::Approx(0.90));
  CHECK(p[1] == doctest::Approx(0.05));
  CHECK(p[2] == doctest::Approx(0.05));
  const std::vector<double> inside{0.5, 0.3, 0.2};
  CHECK(eps_project(inside, 0.1) == inside);
  const auto flat = eps_project(std::vector<double>{1.0, 0.0}, 0.5);
  CHECK(flat[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(eps_project(std::vector<double>{0.5, 0.5}, 0.6), PreconditionError);
  CHECK_THROWS_AS(eps_project(std::vector<double>{0.5, 0.6}, 0.1), PreconditionError);
}

TEST_CASE("eps projection minimizes the max deviation") {
  std::mt19937_64 rng(41);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const std::size_t dim = 2 + i % 5;
    std::vector<double> q(dim);
    double s = 0.0;
    for (double& x : q) s += (x = std::pow(e(rng), 3.0));
    for (double& x : q) x /= s;
    const double eps = unit(rng) / static_cast<double>(dim);
    const auto p = eps_project(q, eps);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    double dev = 0.0, lift = 0.0;
    for (std::size_t u = 0; u < dim; ++u) {
      CHECK(p[u] >= eps - 1e-15);
      dev = std::max(dev, std::abs(p[u] - q[u]));
      lift = std::max(lift, eps - q[u]);
    }
    // Smallest t admitting a feasible point within t of q, by bisection:
    // feasible iff sum_u max(eps, q_u - t) <= 1 and eps - q_u <= t for all u.
    double lo = lift, hi = 1.0;
    const auto feasible = [&](double t) {
      double floor_sum = 0.0;
      for (double x : q) floor_sum += std::max(eps, x - t);
      return floor_sum <= 1.0 + 1e-15;
    };
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? hi : lo) = mid;
    }
    CHECK(dev <= hi + 1e-12);
  }
}

TEST_CASE("initialization samples each control once in order") {
  const Scenario s = golden_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  for (std::size_t u = 0; u < 5; ++u) {
    CHECK_FALSE(policy.initialized());
    CHECK_FALSE(policy.should_stop());
    CHECK_THROWS_AS(policy.z_stats(), UsageError);
    CHECK(policy.next_control() == u);
    CHECK(policy.next_control() == u);
    policy.record_observation(u, s.truth[u] * s.space.models()[u].sigma());
  }
  CHECK(policy.initialized());
  CHECK(policy.steps() == 5);
  const auto tracked = policy.tracked_sums();
  for (double t : tracked) CHECK(t == 1.0);
}

TEST_CASE("sequential interface misuse") {
  const Scenario s = symmetric_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  CHECK_THROWS_AS(policy.record_observation(0, 0.0), UsageError);
  CHECK(policy.next_control() == 0);
  CHECK_THROWS_AS(policy.record_observation(1, 0.0), UsageError);
  PolicyConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(TrackAndStop(s.space, bad), PreconditionError);
  bad = PolicyConfig{};
  bad.rho = 0.5;
  CHECK_THROWS_AS(TrackAndStop(s.space, bad), PreconditionError);
}

TEST_CASE("two hypotheses: Z is the absolute pairwise statistic") {
  const Scenario s = symmetric_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const std::size_t u = policy.next_control();
    policy.record_observation(u, s.space.models()[u].sample(s.truth[u], rng));
  }
  const GlrtView z = policy.z_stats();
  CHECK(z.at(0, 1) == doctest::Approx(-z.at(1, 0)));
  CHECK(z.overall == doctest::Approx(std::abs(z.at(0, 1))));
  CHECK(z.at(0, 1) == doctest::Approx(policy.glrt(0, 1)));
  CHECK_THROWS_AS(policy.glrt(0, 0), PreconditionError);
}

TEST_CASE("no evidence, no stop") {
  const Scenario s = symmetric_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  policy.record_observation(policy.next_control(), 0.0);
  policy.record_observation(policy.next_control(), 0.0);
  CHECK(policy.z_stats().overall == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(policy.should_stop());
}

TEST_CASE("long golden run favours the true hypothesis and tracks") {
  const Scenario s = golden_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  Rng rng(17);
  std::size_t violations = 0;
  for (int n = 0; n < 10000; ++n) {
    const std::size_t u = policy.next_control();
    policy.record_observation(u, s.space.models()[u].sample(s.truth[u], rng));
    if (policy.initialized()) {
      const TrackingCheck c = policy.check_tracking();
      violations += (c.count_floor_ok && c.deviation_ok) ? 0 : 1;
    }
  }
  CHECK(violations == 0);
  CHECK(policy.recommend() == 0);
  CHECK(policy.decide() == 0);
  const GlrtView z = policy.z_stats();
  for (std::size_t j = 1; j < 4; ++j) CHECK(z.at(0, j) > 0.0);
  const double total = std::accumulate(policy.counts().begin(), policy.counts().end(), std::size_t{0});
  CHECK(total == 10000);
  // the oracle cache keeps re-solves well below the step count
  CHECK(policy.oracle_solves() < 10000);
}

TEST_CASE("plug-in estimate lies in the recommended hypothesis' closure") {
  const Scenario s = anomaly_scenario();
  TrackAndStop policy(s.space, PolicyConfig{});
  Rng rng(8);
  for (int n = 0; n < 200; ++n) {
    const std::size_t u = policy.next_control();
    policy.record_observation(u, s.space.models()[u].sample(s.truth[u], rng));
  }
  const auto p = policy.plugin_estimate();
  CHECK(distance(p, s.space.set(policy.recommend()), s.space.models()) <= 1e-9);
}
