// Shared fixtures and independent reference computations for the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ctsense/hypothesis.hpp"
#include "ctsense/simulator.hpp"

namespace ctsense::testing {

inline std::vector<ExpFamilyModel> golden_models() {
  std::vector<ExpFamilyModel> models;
  for (double s : {1.0, 1.0, 4.0, 2.0, 3.0}) models.push_back(ExpFamilyModel::gaussian(s));
  return models;
}

inline std::vector<HypothesisSet> golden_sets() {
  return {
      {BoxCell{{0, 1, 2, 3, 4}, {2, 3, 4, 5, 6}}},
      {BoxCell{{0, -2, 4, 3, 7}, {2, 0, 6, 5, 9}}},
      {BoxCell{{-2, 1, 2, 5, 2}, {0, 3, 4, 7, 5}}},
      {BoxCell{{-2, 3, 0, 3, 4}, {0, 5, 2, 5, 6}}},
  };
}

inline Scenario golden_scenario() {
  return Scenario{"golden", HypothesisSpace(golden_models(), golden_sets()), {1, 2, 3, 4, 5}};
}

inline Scenario symmetric_scenario() {
  std::vector<ExpFamilyModel> models(2, ExpFamilyModel::gaussian(1.0));
  return Scenario{"symmetric", HypothesisSpace(models, {{OrderCell{{0}}}, {OrderCell{{1}}}}), {1.0, -1.0}};
}

inline Scenario anomaly_scenario() {
  std::vector<ExpFamilyModel> models(3, ExpFamilyModel::gaussian(1.0));
  return Scenario{"anomaly",
                  HypothesisSpace(models, {anomaly_hypothesis(0), anomaly_hypothesis(1), anomaly_hypothesis(2)}),
                  {2.0, 1.0, 1.0}};
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Golden-section minimization of a unimodal function on [a, b].
inline double golden_min(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Enumerates all points of the simplex grid with the given step.
inline void for_each_grid_point(std::size_t dim, int steps, const std::function<void(const std::vector<double>&)>& visit) {
  std::vector<int> k(dim, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == dim) {
      k[i] = left;
      std::vector<double> q(dim);
      for (std::size_t u = 0; u < dim; ++u) q[u] = static_cast<double>(k[u]) / steps;
      visit(q);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      k[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, steps);
}

/// Box-only weighted KL infimum computed coordinate-wise by golden section,
/// independent of the library's fitting code.
inline double box_kl_inf(const std::vector<double>& theta, const std::vector<double>& q, const BoxCell& box,
                         const std::vector<ExpFamilyModel>& models) {
  double total = 0.0;
  for (std::size_t u = 0; u < theta.size(); ++u) {
    if (q[u] == 0.0) continue;
    const auto f = [&](double x) { return models[u].kl(theta[u], x); };
    const double x = golden_min(f, box.lo[u], box.hi[u]);
    total += q[u] * std::min({f(x), f(box.lo[u]), f(box.hi[u])});
  }
  return total;
}


inline double log_density(const ExpFamilyModel& m, double theta, double y) {
  return theta * m.suff_stat(y) - m.log_partition(theta);
}

// KL by direct summation/integration of p log(p/q); the base measure cancels.
inline double numeric_kl(const ExpFamilyModel& m, double a, double b) {
  switch (m.family()) {
    case Family::Gaussian: {
      const double s = m.sigma();
      const double mu = a * s;
      const auto f = [&](double y) {
        const double z = (y - mu) / s;
        const double p = std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
        return p * (log_density(m, a, y) - log_density(m, b, y));
      };
      return simpson(f, mu - 14.0 * s, mu + 14.0 * s, 20000);
    }
    case Family::Bernoulli: {
      const double p = 1.0 / (1.0 + std::exp(-a));
      return p * (log_density(m, a, 1) - log_density(m, b, 1)) + (1 - p) * (log_density(m, a, 0) - log_density(m, b, 0));
    }
    case Family::Poisson: {
      const double lambda = std::exp(a);
      double total = 0.0;
      double logp = -lambda;
      for (int k = 0; k < 400; ++k) {
        if (k > 0) logp += std::log(lambda) - std::log(static_cast<double>(k));
        total += std::exp(logp) * (log_density(m, a, k) - log_density(m, b, k));
      }
      return total;
    }
    case Family::Exponential: {
      const double rate = -a;
      const auto f = [&](double y) { return rate * std::exp(-rate * y) * (log_density(m, a, y) - log_density(m, b, y)); };
      return simpson(f, 0.0, 60.0 / rate, 40000);
    }
  }
  return NAN;
}

inline double log_lik(const std::vector<double>& theta, const std::vector<double>& S, const std::vector<double>& N,
                      const std::vector<ExpFamilyModel>& models) {
  double s = 0.0;
  for (std::size_t u = 0; u < theta.size(); ++u) s += theta[u] * S[u] - N[u] * models[u].log_partition(theta[u]);
  return s;
}

struct BoxMleCheck {
  double max_loglik_error = 0.0;
  double max_point_error = 0.0;
};

/// Random two-control boxes over mixed families: constrained_mle against a
/// per-coordinate grid search refined by golden section.
inline BoxMleCheck box_mle_check(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<ExpFamilyModel> roster{ExpFamilyModel::gaussian(1.3), ExpFamilyModel::bernoulli(),
                                           ExpFamilyModel::poisson(), ExpFamilyModel::exponential()};
  BoxMleCheck out;
  for (int c = 0; c < cases; ++c) {
    const std::vector<ExpFamilyModel> models{roster[c % 4], roster[(c + 1) % 4]};
    std::vector<double> lo(2), hi(2), S(2), N(2);
    for (std::size_t u = 0; u < 2; ++u) {
      const bool expo = models[u].family() == Family::Exponential;
      const double a = expo ? -3.0 + 2.5 * unit(rng) : -2.0 + 4.0 * unit(rng);
      const double w = 0.2 + (expo ? 0.2 : 1.5) * unit(rng);
      lo[u] = a;
      hi[u] = expo ? std::min(a + w, -0.05) : a + w;
      N[u] = 1 + std::floor(20 * unit(rng));
      const double kappa = models[u].mean_param(lo[u] - 1.0 + (hi[u] - lo[u] + 2.0) * unit(rng) * (expo ? 0.5 : 1.0));
      S[u] = N[u] * kappa;
    }
    const MleResult r = constrained_mle(HypothesisSet{BoxCell{lo, hi}}, S, N, models);
    std::vector<double> ref(2);
    for (std::size_t u = 0; u < 2; ++u) {
      const auto neg = [&](double x) { return -(x * S[u] - N[u] * models[u].log_partition(x)); };
      double best = lo[u];
      for (int k = 0; k <= 2000; ++k) {
        const double x = lo[u] + (hi[u] - lo[u]) * k / 2000.0;
        if (neg(x) < neg(best)) best = x;
      }
      const double step = (hi[u] - lo[u]) / 2000.0;
      ref[u] = golden_min(neg, std::max(lo[u], best - step), std::min(hi[u], best + step));
    }
    out.max_loglik_error = std::max(out.max_loglik_error, std::abs(r.log_likelihood - log_lik(ref, S, N, models)));
    out.max_point_error = std::max({out.max_point_error, std::abs(r.point[0] - ref[0]), std::abs(r.point[1] - ref[1])});
  }
  return out;
}

}  // namespace ctsense::testing
