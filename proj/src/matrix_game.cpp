#include "ctsense/matrix_game.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctsense {

GameSolution solve_max_min(std::span<const std::vector<double>> payoffs, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("empty strategy space");
  if (payoffs.empty()) throw std::invalid_argument("no payoff rows");

  // maximize t  s.t.  t - <g_k, q> <= 0,  sum q <= 1,  q, t >= 0.
  // With g_k >= 0 the simplex constraint is tight at any optimum with t > 0.
  const std::size_t rows = payoffs.size() + 1;
  const std::size_t vars = dim + 1;
  const std::size_t cols = vars + rows + 1;  // structural, slack, rhs
  const std::size_t rhs = cols - 1;
  std::vector<double> tab(rows * cols, 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& { return tab[r * cols + c]; };

  for (std::size_t k = 0; k < payoffs.size(); ++k) {
    if (payoffs[k].size() != dim) throw std::invalid_argument("payoff row has wrong size");
    for (std::size_t u = 0; u < dim; ++u) {
      if (!(payoffs[k][u] >= 0.0)) throw std::invalid_argument("payoffs must be non-negative");
      at(k, u) = -payoffs[k][u];
    }
    at(k, dim) = 1.0;
    at(k, vars + k) = 1.0;
  }
  for (std::size_t u = 0; u < dim; ++u) at(rows - 1, u) = 1.0;
  at(rows - 1, vars + rows - 1) = 1.0;
  at(rows - 1, rhs) = 1.0;

  std::vector<double> cost(cols, 0.0);  // reduced costs for maximization
  cost[dim] = 1.0;
  std::vector<std::size_t> basis(rows);
  for (std::size_t r = 0; r < rows; ++r) basis[r] = vars + r;

  constexpr double kEps = 1e-12;
  const std::size_t max_pivots = 50 * (rows + cols) + 1000;
  for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
    std::size_t enter = cols;
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      if (cost[c] > kEps) {
        enter = c;
        break;
      }
    }
    if (enter == cols) break;

    std::size_t leave = rows;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = at(r, enter);
      if (a <= kEps) continue;
      const double ratio = at(r, rhs) / a;
      if (ratio < best_ratio - kEps || (std::abs(ratio - best_ratio) <= kEps && leave < rows &&
                                        basis[r] < basis[leave])) {
        best_ratio = ratio;
        leave = r;
      }
    }
    // The simplex row bounds every structural variable, so the LP is bounded.
    if (leave == rows) throw std::runtime_error("max-min game: unbounded pivot");

    const double p = at(leave, enter);
    for (std::size_t c = 0; c < cols; ++c) at(leave, c) /= p;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) at(r, c) -= f * at(leave, c);
    }
    const double f = cost[enter];
    for (std::size_t c = 0; c + 1 < cols; ++c) cost[c] -= f * at(leave, c);
    basis[leave] = enter;
  }

  GameSolution sol{0.0, std::vector<double>(dim, 0.0)};
  for (std::size_t r = 0; r < rows; ++r) {
    if (basis[r] < dim) sol.strategy[basis[r]] = std::max(0.0, at(r, rhs));
  }
  double total = 0.0;
  for (double w : sol.strategy) total += w;
  if (total <= 0.0) {
    sol.strategy.assign(dim, 1.0 / static_cast<double>(dim));
  } else {
    for (double& w : sol.strategy) w /= total;
  }
  // Report the exact model value at the returned strategy.
  double value = std::numeric_limits<double>::infinity();
  for (const auto& row : payoffs) {
    double v = 0.0;
    for (std::size_t u = 0; u < dim; ++u) v += row[u] * sol.strategy[u];
    value = std::min(value, v);
  }
  sol.value = value;
  return sol;
}

}  // namespace ctsense
