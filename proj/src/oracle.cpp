#include "ctsense/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctsense/matrix_game.hpp"

namespace ctsense {

double binary_rel_entropy(double x, double y) {
  if (!(x > 0.0 && x < 1.0) || !(y > 0.0 && y < 1.0)) {
    throw DomainError("binary relative entropy needs arguments strictly inside (0, 1)");
  }
  const double v = x * std::log(x / y) + (1.0 - x) * (std::log1p(-x) - std::log1p(-y));
  return v < 0.0 ? 0.0 : v;
}

BestResponse best_response(std::span<const double> theta, std::span<const double> q,
                           const HypothesisSpace& space, std::size_t truth_hypothesis) {
  if (truth_hypothesis >= space.num_hypotheses()) throw PreconditionError("hypothesis index out of range");
  if (space.num_hypotheses() < 2) throw ConfigError("no alternative hypothesis");
  BestResponse best{std::numeric_limits<double>::infinity(), {}, 0, 0, {}};
  for (std::size_t m = 0; m < space.num_hypotheses(); ++m) {
    if (m == truth_hypothesis) continue;
    KlInfResult r = weighted_kl_inf(theta, q, space.set(m), space.models());
    if (r.value < best.value) {
      best.value = r.value;
      best.alternative = std::move(r.point);
      best.hypothesis = m;
      best.cell = r.cell;
    }
  }
  const auto models = space.models();
  best.divergences.resize(models.size());
  for (std::size_t u = 0; u < models.size(); ++u) {
    best.divergences[u] = models[u].kl(theta[u], best.alternative[u]);
  }
  return best;
}

OracleResult solve_oracle(std::span<const double> theta, const HypothesisSpace& space,
                          const OracleOptions& options) {
  const auto truth = space.classify(theta);
  if (!truth) throw ConfigError("parameter vector lies in no hypothesis set");
  return solve_oracle(theta, space, *truth, options);
}

// Kelley cutting planes: every best response at q yields the affine function
// q' -> <q', D(theta || alternative)>, which upper-bounds f everywhere on the
// simplex. The max-min over collected cuts is an upper bound on max f, and
// the best evaluated f is a lower bound; their difference is the gap.
OracleResult solve_oracle(std::span<const double> theta, const HypothesisSpace& space,
                          std::size_t truth_hypothesis, const OracleOptions& options) {
  const std::size_t dim = space.num_controls();
  if (!(options.tol > 0.0)) throw PreconditionError("oracle tolerance must be positive");
  if (theta.size() != dim) throw PreconditionError("parameter vector has wrong dimension");

  Proportions q = options.warm_start;
  if (q.empty()) {
    q.assign(dim, 1.0 / static_cast<double>(dim));
  } else {
    require_proportions(q, dim);
  }

  std::vector<std::vector<double>> cuts;
  OracleResult best{-1.0, q, {}, 0, std::numeric_limits<double>::infinity()};
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    BestResponse br = best_response(theta, q, space, truth_hypothesis);
    if (br.value > best.d_star) {
      best.d_star = br.value;
      best.q_star = q;
      best.worst_alternative = br.alternative;
    }
    cuts.push_back(std::move(br.divergences));
    const GameSolution model = solve_max_min(cuts, dim);
    best.iterations = it;
    best.certified_gap = std::max(0.0, model.value - best.d_star);
    if (best.certified_gap <= options.tol) return best;
    q = model.strategy;
  }
  throw SolverError("oracle did not reach tolerance within " + std::to_string(options.max_iterations) +
                        " iterations",
                    best);
}

double lower_bound(double alpha, double d_star) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(d_star > 0.0) || !std::isfinite(d_star)) throw DomainError("d_star must be positive");
  if (alpha == 0.5) return 0.0;
  return binary_rel_entropy(alpha, 1.0 - alpha) / d_star;
}

}  // namespace ctsense
