#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctsense/hypothesis.hpp"
#include "ctsense/oracle.hpp"
#include "ctsense/policy.hpp"

namespace ctsense {

/// Ground truth plus the hypothesis space it is tested against.
struct Scenario {
  std::string name;
  HypothesisSpace space;
  ParamVector truth;

  /// Hypothesis containing the truth; throws ConfigError if there is none or
  /// the dimensions disagree.
  std::size_t true_hypothesis() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

class StepCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trial error tagged with the index of the trial that raised it.
class TrialError : public std::runtime_error {
 public:
  TrialError(std::size_t trial, const std::string& what)
      : std::runtime_error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}
  std::size_t trial() const { return trial_; }

 private:
  std::size_t trial_;
};

struct TrialOptions {
  std::size_t step_cap = 10'000'000;
  /// Verify the tracking guarantees after every step.
  bool check_tracking = true;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::size_t stopping_time = 0;
  std::size_t decision = 0;
  bool correct = false;
  std::vector<std::size_t> final_counts;
  /// Steps at which a tracking guarantee failed (0 when unchecked).
  std::size_t tracking_violations = 0;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

/// Runs the policy until it stops. Deterministic given the seed.
TrialResult run_trial(const Scenario& scenario, const PolicyConfig& config, std::uint64_t seed,
                      const TrialOptions& options = {});

struct RunSummary {
  double alpha = 0.0;
  std::size_t trials = 0;
  double mean_tau = 0.0;
  double std_tau = 0.0;
  double error_rate = 0.0;
  /// mean_tau / |log alpha|
  double ratio = 0.0;
  /// d(alpha || 1 - alpha) / (|log alpha| D*)
  double lower_bound_ratio = 0.0;
  double d_star = 0.0;
  std::size_t tracking_violations = 0;
};

struct BatchResult {
  RunSummary summary;
  std::vector<TrialResult> trials;
};

/// Default degree of parallelism: CTSENSE_THREADS if set, else the hardware
/// concurrency.
std::size_t default_parallelism();

/// Trial k uses seed base_seed + k; results do not depend on parallelism.
BatchResult run_batch(const Scenario& scenario, const PolicyConfig& config, std::size_t trials,
                      std::uint64_t base_seed, std::size_t parallelism = 0,
                      const TrialOptions& options = {});

/// Aggregates finished trials; d_star feeds the lower-bound column.
RunSummary summarize(const std::vector<TrialResult>& trials, double alpha, double d_star);

/// One batch per alpha, each with the same base seed.
std::vector<RunSummary> sweep_alpha(const Scenario& scenario, const PolicyConfig& config,
                                    const std::vector<double>& alphas, std::size_t trials,
                                    std::uint64_t base_seed, std::size_t parallelism = 0,
                                    const TrialOptions& options = {});

/// Concentration bound 2 e^{-beta} (beta ceil(beta log n) / |U|)^{|U|} e^{|U|+1}.
double concentration_bound(double beta, std::size_t n, std::size_t num_controls);

/// Smallest beta for which the concentration bound is valid: |U| + 1 + log 2.
double concentration_floor(std::size_t num_controls);

struct ConcentrationRow {
  double beta;
  double empirical;
  double bound;
  double std_error;
  bool pass;
};

/// Empirical P[sum_u N_u(n) D_u(theta*(n) || theta) >= beta] under uniformly
/// random control selection, compared with concentration_bound. A row passes
/// when empirical <= bound + 3 binomial standard errors.
std::vector<ConcentrationRow> verify_concentration(std::span<const ExpFamilyModel> models,
                                                   std::span<const double> truth, std::size_t n,
                                                   const std::vector<double>& betas, std::size_t samples,
                                                   std::uint64_t seed, std::size_t parallelism = 0);

/// Diagnostics from a run with stopping disabled.
struct ConvergenceTrace {
  std::vector<std::size_t> checkpoints;
  /// ||theta*(n) - theta|| at each checkpoint.
  std::vector<double> mle_error;
  /// Z_{g(theta)}(n) / n at each checkpoint.
  std::vector<double> rate;
  std::vector<std::size_t> final_counts;
  std::size_t tracking_violations = 0;
};

ConvergenceTrace run_without_stopping(const Scenario& scenario, const PolicyConfig& config,
                                      std::size_t horizon, std::uint64_t seed,
                                      const std::vector<std::size_t>& checkpoints);

}  // namespace ctsense
