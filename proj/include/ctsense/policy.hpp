#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ctsense/hypothesis.hpp"
#include "ctsense/oracle.hpp"

namespace ctsense {

/// Misuse of the sequential interface (e.g. recording an observation for a
/// control that was not selected).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PolicyConfig {
  /// Error-probability target, in (0, 1).
  double alpha = 0.01;
  /// Slack allowed for the plug-in point when no exact nearest point exists.
  double rho = 1.1;
  double oracle_tol = 1e-6;
  std::size_t oracle_max_iterations = 100000;
  /// The plug-in proportions are re-solved once the plug-in point has moved
  /// this far (Euclidean) from where they were last solved.
  double resolve_distance = 1e-3;
};

void validate(const PolicyConfig& config);

/// Constant term of the stopping threshold for |U| controls.
double threshold_constant(std::size_t num_controls);

/// beta(n, alpha) = v(n) + w(alpha).
double threshold(std::size_t n, double alpha, std::size_t num_controls);

/// Forced-exploration floor for the k-th tracking step (k >= 1).
double exploration_eps(std::size_t k, std::size_t num_controls);

/// L-infinity projection of q onto {q' in simplex : q'_u >= eps}: coordinates
/// below eps are raised to eps and every other coordinate is lowered by the
/// same amount (never below eps) until the sum is back to 1.
Proportions eps_project(std::span<const double> q, double eps);

/// Pairwise GLRT statistics for one time step.
struct GlrtView {
  std::size_t hypotheses = 0;
  /// Row-major Z_{i,j}; the diagonal is zero.
  std::vector<double> pairwise;
  /// Z_i = min over j != i of Z_{i,j}.
  std::vector<double> per_hypothesis;
  /// Z = max over i of Z_i.
  double overall = 0.0;
  /// argmax of Z_i, lowest index on ties.
  std::size_t leader = 0;

  double at(std::size_t i, std::size_t j) const { return pairwise[i * hypotheses + j]; }
};

/// Outcome of checking the C-tracking guarantees at the current step.
struct TrackingCheck {
  bool count_floor_ok;
  bool deviation_ok;
  /// min_u N_u(n) - (sqrt(n + |U|^2) - 2|U|)
  double count_margin;
  /// max_u |N_u(n) - tracked_u(n)|
  double max_deviation;
  double deviation_limit;
};

/// Sequential GLRT track-and-stop policy for one trial.
///
/// Usage per step: u = next_control(); observe y under u;
/// record_observation(u, y); stop when should_stop(). Controls are first
/// selected once each in index order; afterwards the control with the largest
/// lag between the cumulative eps-projected plug-in proportions and its count
/// is selected.
class TrackAndStop {
 public:
  TrackAndStop(const HypothesisSpace& space, PolicyConfig config);

  std::size_t steps() const { return n_; }
  bool initialized() const { return n_ >= space_->num_controls(); }
  std::span<const std::size_t> counts() const { return counts_; }
  std::span<const double> stat_sums() const { return sums_; }
  /// Cumulative tracked proportions (including the initialization picks).
  std::span<const double> tracked_sums() const { return tracked_; }
  /// Plug-in proportions used at the most recent tracking step.
  const Proportions& plugin_proportions() const { return cached_q_; }
  std::size_t oracle_solves() const { return solves_; }
  const PolicyConfig& config() const { return config_; }

  std::size_t next_control();
  void record_observation(std::size_t control, double y);

  ParamVector global_mle() const;
  /// Log of the sup-likelihood ratio between hypotheses i and j.
  double glrt(std::size_t i, std::size_t j) const;
  GlrtView z_stats() const;
  double current_threshold() const;
  bool should_stop() const;
  /// Hypothesis nearest to the global MLE, lowest index on ties.
  std::size_t recommend() const;
  ParamVector plugin_estimate() const;
  /// Terminal decision: argmax of Z_i.
  std::size_t decide() const;

  TrackingCheck check_tracking() const;

 private:
  void require_initialized(const char* what) const;
  const Proportions& plugin_target(const ParamVector& plugin, std::size_t recommended);

  const HypothesisSpace* space_;
  PolicyConfig config_;
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
  std::vector<double> count_values_;
  std::vector<double> sums_;
  std::vector<double> tracked_;
  std::vector<double> log_likelihood_;
  std::optional<std::size_t> pending_;

  std::optional<ParamVector> solved_at_;
  std::size_t solved_for_ = 0;
  Proportions cached_q_;
  std::size_t solves_ = 0;
};

}  // namespace ctsense
