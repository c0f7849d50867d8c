#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ctsense/hypothesis.hpp"

namespace ctsense {

/// Sampling proportions over controls (non-negative, summing to one).
using Proportions = std::vector<double>;

/// d(x || y) for Bernoulli parameters strictly inside (0, 1).
double binary_rel_entropy(double x, double y);

struct BestResponse {
  double value;
  ParamVector alternative;
  std::size_t hypothesis;
  std::size_t cell;
  /// D_u(theta || alternative) per control: a supergradient of f at q.
  std::vector<double> divergences;
};

/// f(q) = inf over every cell of every hypothesis other than `truth_hypothesis`
/// of sum_u q_u D_u(theta || theta'). Ties go to the lowest (hypothesis, cell).
BestResponse best_response(std::span<const double> theta, std::span<const double> q,
                           const HypothesisSpace& space, std::size_t truth_hypothesis);

struct OracleOptions {
  double tol = 1e-6;
  std::size_t max_iterations = 100000;
  /// Starting proportions; uniform when empty.
  Proportions warm_start;
};

struct OracleResult {
  double d_star;
  Proportions q_star;
  ParamVector worst_alternative;
  std::size_t iterations;
  /// Upper bound on max f minus d_star.
  double certified_gap;
};

/// Carries the best iterate when the solver hits its iteration cap.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, OracleResult best) : std::runtime_error(what), best_(std::move(best)) {}
  const OracleResult& best() const { return best_; }

 private:
  OracleResult best_;
};

/// Maximizes the concave f over the simplex for the hypothesis containing
/// theta. Throws ConfigError if theta is in no hypothesis.
OracleResult solve_oracle(std::span<const double> theta, const HypothesisSpace& space,
                          const OracleOptions& options = {});

/// Same, with the truth hypothesis given explicitly (used for plug-in points
/// that sit on the boundary of their recommended set).
OracleResult solve_oracle(std::span<const double> theta, const HypothesisSpace& space,
                          std::size_t truth_hypothesis, const OracleOptions& options = {});

/// Expected-delay lower bound d(alpha || 1 - alpha) / d_star.
double lower_bound(double alpha, double d_star);

}  // namespace ctsense
