#pragma once

#include <span>
#include <vector>

namespace ctsense {

struct GameSolution {
  double value;
  std::vector<double> strategy;
};

/// Solves max over the probability simplex of min_k <q, payoffs[k]> for
/// non-negative payoff rows, by a dense simplex method with Bland's rule.
/// Returns the uniform strategy when every payoff is zero.
GameSolution solve_max_min(std::span<const std::vector<double>> payoffs, std::size_t dim);

}  // namespace ctsense
