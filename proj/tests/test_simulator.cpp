#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "ctsense/simulator.hpp"
#include "support.hpp"

using namespace ctsense;
using namespace ctsense::testing;

namespace {

bool same_summary(const RunSummary& a, const RunSummary& b) {
  return a.trials == b.trials && a.mean_tau == b.mean_tau && a.std_tau == b.std_tau &&
         a.error_rate == b.error_rate && a.ratio == b.ratio && a.lower_bound_ratio == b.lower_bound_ratio &&
         a.tracking_violations == b.tracking_violations;
}

}  // namespace

TEST_CASE("trials are reproducible and well formed") {
  const Scenario s = golden_scenario();
  PolicyConfig config;
  config.alpha = 0.05;
  const TrialResult a = run_trial(s, config, 42);
  const TrialResult b = run_trial(s, config, 42);
  CHECK(a == b);
  CHECK(a.stopping_time >= 5);
  CHECK(std::accumulate(a.final_counts.begin(), a.final_counts.end(), std::size_t{0}) == a.stopping_time);
  CHECK(a.tracking_violations == 0);
  CHECK_FALSE(run_trial(s, config, 43) == a);
}

TEST_CASE("batches do not depend on the thread count") {
  const Scenario s = anomaly_scenario();
  PolicyConfig config;
  config.alpha = 0.1;
  const BatchResult one = run_batch(s, config, 24, 100, 1);
  const BatchResult many = run_batch(s, config, 24, 100, 4);
  CHECK(one.trials == many.trials);
  CHECK(same_summary(one.summary, many.summary));
  for (std::size_t k = 0; k < one.trials.size(); ++k) CHECK(one.trials[k].seed == 100 + k);
}

TEST_CASE("a single trial summarizes to itself") {
  const Scenario s = symmetric_scenario();
  const BatchResult b = run_batch(s, PolicyConfig{}, 1, 7, 1);
  CHECK(b.summary.mean_tau == static_cast<double>(b.trials[0].stopping_time));
  CHECK(b.summary.std_tau == 0.0);
  CHECK(b.summary.d_star == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(run_batch(s, PolicyConfig{}, 0, 7, 1), PreconditionError);
}

TEST_CASE("summary arithmetic") {
  std::vector<TrialResult> trials(4);
  const std::size_t taus[] = {10, 20, 30, 40};
  for (std::size_t i = 0; i < 4; ++i) {
    trials[i].stopping_time = taus[i];
    trials[i].correct = i != 2;
  }
  const RunSummary s = summarize(trials, std::exp(-2.0), 0.5);
  CHECK(s.mean_tau == doctest::Approx(25.0));
  CHECK(s.std_tau == doctest::Approx(std::sqrt(500.0 / 3.0)));
  CHECK(s.error_rate == doctest::Approx(0.25));
  CHECK(s.ratio == doctest::Approx(12.5));
  const double a = std::exp(-2.0);
  const double d = a * std::log(a / (1 - a)) + (1 - a) * std::log((1 - a) / a);
  CHECK(s.lower_bound_ratio == doctest::Approx(d / (2.0 * 0.5)));
}

TEST_CASE("trial errors carry the trial index") {
  const Scenario s = golden_scenario();
  TrialOptions options;
  options.step_cap = 6;
  CHECK_THROWS_AS(run_trial(s, PolicyConfig{}, 1, options), StepCapExceeded);
  try {
    run_batch(s, PolicyConfig{}, 3, 5, 2, options);
    FAIL("expected TrialError");
  } catch (const TrialError& e) {
    CHECK(e.trial() == 0);
  }
}

TEST_CASE("scenario truth must be classified") {
  Scenario s = golden_scenario();
  s.truth = {9, 9, 9, 9, 9};
  CHECK_THROWS_AS(s.true_hypothesis(), ConfigError);
  s.truth = {1, 2, 3};
  CHECK_THROWS_AS(s.true_hypothesis(), ConfigError);
}

TEST_CASE("lower bound dominance on a small batch") {
  const Scenario s = golden_scenario();
  PolicyConfig config;
  config.alpha = 0.05;
  const RunSummary r = run_batch(s, config, 50, 1, 1).summary;
  const double abs_log = std::abs(std::log(config.alpha));
  CHECK(r.mean_tau >= r.lower_bound_ratio * abs_log - 3.0 * r.std_tau / std::sqrt(50.0));
  CHECK(r.ratio >= r.lower_bound_ratio);
  CHECK(r.tracking_violations == 0);
}

TEST_CASE("sweep gives one row per alpha") {
  const Scenario s = symmetric_scenario();
  const auto rows = sweep_alpha(s, PolicyConfig{}, {0.1, 0.01}, 5, 3, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].alpha == 0.1);
  CHECK(rows[1].alpha == 0.01);
  CHECK(rows[1].lower_bound_ratio > rows[0].lower_bound_ratio);
}

TEST_CASE("concentration bound formula") {
  const std::size_t U = 5;
  const double beta = U + 1 + std::log(2.0);
  CHECK(concentration_floor(U) == doctest::Approx(beta));
  const double levels = std::ceil(beta * std::log(50.0));
  const double expected = 2.0 * std::exp(-beta) * std::pow(beta * levels / U, U) * std::exp(U + 1.0);
  CHECK(concentration_bound(beta, 50, U) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(concentration_bound(25.0, 200, 2) == doctest::Approx(2.0 * std::exp(-25.0) * std::pow(25.0 * std::ceil(25.0 * std::log(200.0)) / 2, 2) * std::exp(3.0)));
  CHECK_THROWS_AS(concentration_bound(beta - 0.01, 50, U), DomainError);
}

TEST_CASE("concentration check, two gaussian controls") {
  const std::vector<ExpFamilyModel> models(2, ExpFamilyModel::gaussian(1.0));
  const std::vector<double> truth{0.3, -0.2};
  const auto rows = verify_concentration(models, truth, 100, {10.0}, 100000, 9, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pass);
  CHECK(rows[0].empirical <= rows[0].bound);
  // chi-square with at most two degrees of freedom: P[chi2_2 / 2 >= 10] = e^-10
  CHECK(rows[0].empirical < 1e-3);
  CHECK_THROWS_AS(verify_concentration(models, truth, 100, {3.0}, 100000, 9, 1), DomainError);
  CHECK_THROWS_AS(verify_concentration(models, truth, 100, {10.0}, 100, 9, 1), PreconditionError);
  const auto again = verify_concentration(models, truth, 100, {10.0}, 10000, 9, 1);
  const auto threaded = verify_concentration(models, truth, 100, {10.0}, 10000, 9, 3);
  CHECK(again[0].empirical == threaded[0].empirical);
}

TEST_CASE("stopping-disabled trace") {
  const Scenario s = golden_scenario();
  const ConvergenceTrace t = run_without_stopping(s, PolicyConfig{}, 3000, 4, {100, 1000});
  REQUIRE(t.checkpoints == std::vector<std::size_t>{100, 1000, 3000});
  CHECK(t.mle_error.size() == 3);
  CHECK(t.rate.size() == 3);
  CHECK(std::accumulate(t.final_counts.begin(), t.final_counts.end(), std::size_t{0}) == 3000);
  CHECK(t.tracking_violations == 0);
  CHECK(t.mle_error.back() < t.mle_error.front());
}
