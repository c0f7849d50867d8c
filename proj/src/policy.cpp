#include "ctsense/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace ctsense {

void validate(const PolicyConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (!(config.rho >= 1.0)) throw PreconditionError("rho must be at least 1");
  if (!(config.oracle_tol > 0.0)) throw PreconditionError("oracle tolerance must be positive");
  if (config.oracle_max_iterations == 0) throw PreconditionError("oracle iteration cap must be positive");
  if (!(config.resolve_distance >= 0.0)) throw PreconditionError("resolve distance must be non-negative");
}

double threshold_constant(std::size_t num_controls) {
  if (num_controls == 0) throw DomainError("threshold needs at least one control");
  const double u = static_cast<double>(num_controls);
  // log(2 e^{U+1} / U^U)
  const double log_ratio = std::log(2.0) + (u + 1.0) - u * std::log(u);
  const double radicand = 2.0 * std::log(2.0 * u / std::exp(1.0)) + log_ratio / u;
  if (radicand < 0.0) throw DomainError("threshold constant undefined for this control count");
  return 2.0 * u * std::sqrt(radicand) + log_ratio;
}

double threshold(std::size_t n, double alpha, std::size_t num_controls) {
  if (n == 0) throw DomainError("threshold needs n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const double u = static_cast<double>(num_controls);
  const double log_alpha = std::abs(std::log(alpha));
  const double w = log_alpha + std::sqrt(4.0 * u * log_alpha);
  const double log_n = std::log(static_cast<double>(n));
  const double l = log_n + (u + 2.0) * std::log1p(log_n);
  const double v = threshold_constant(num_controls) + l + std::sqrt(4.0 * u * l);
  return v + w;
}

double exploration_eps(std::size_t k, std::size_t num_controls) {
  if (k == 0) throw DomainError("exploration index starts at 1");
  const double u = static_cast<double>(num_controls);
  return 0.5 / std::sqrt(u * u + static_cast<double>(k));
}

Proportions eps_project(std::span<const double> q, double eps) {
  const std::size_t dim = q.size();
  if (dim == 0) throw PreconditionError("empty proportions");
  require_proportions(q, dim);
  if (!(eps > 0.0) || eps > 1.0 / static_cast<double>(dim) * (1.0 + 1e-12)) {
    throw PreconditionError("eps-projection infeasible: eps must lie in (0, 1/|U|]");
  }
  bool feasible = true;
  for (double w : q) feasible = feasible && w >= eps;
  if (feasible) return Proportions(q.begin(), q.end());

  // p_u = max(eps, q_u - t) with t fixed by sum p = 1; every coordinate with
  // room is lowered by the same amount, which minimizes the largest change.
  std::vector<double> sorted(q.begin(), q.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double head = 0.0;
  double t = 0.0;
  for (std::size_t k = 1; k <= dim; ++k) {
    head += sorted[k - 1];
    t = (head + static_cast<double>(dim - k) * eps - 1.0) / static_cast<double>(k);
    if (k == dim || sorted[k] - t <= eps) break;
  }
  Proportions out(dim);
  for (std::size_t u = 0; u < dim; ++u) out[u] = std::max(eps, q[u] - t);
  return out;
}

TrackAndStop::TrackAndStop(const HypothesisSpace& space, PolicyConfig config)
    : space_(&space),
      config_(config),
      counts_(space.num_controls(), 0),
      count_values_(space.num_controls(), 0.0),
      sums_(space.num_controls(), 0.0),
      tracked_(space.num_controls(), 0.0),
      log_likelihood_(space.num_hypotheses(), 0.0) {
  validate(config_);
}

void TrackAndStop::require_initialized(const char* what) const {
  if (!initialized()) {
    throw UsageError(std::string(what) + " needs every control observed at least once");
  }
}

std::size_t TrackAndStop::next_control() {
  if (pending_) return *pending_;
  const std::size_t dim = space_->num_controls();
  if (!initialized()) {
    pending_ = n_;
    tracked_[n_] += 1.0;
    return n_;
  }

  const std::size_t k = n_ - dim + 1;
  const std::size_t recommended = recommend();
  const ParamVector plugin = nearest_point(global_mle(), space_->set(recommended), space_->models(), config_.rho);
  const Proportions& target = plugin_target(plugin, recommended);
  const Proportions projected = eps_project(target, exploration_eps(k, dim));

  std::size_t choice = 0;
  double best_lag = -std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < dim; ++u) {
    tracked_[u] += projected[u];
    const double lag = tracked_[u] - count_values_[u];
    if (lag > best_lag) {
      best_lag = lag;
      choice = u;
    }
  }
  pending_ = choice;
  return choice;
}

const Proportions& TrackAndStop::plugin_target(const ParamVector& plugin, std::size_t recommended) {
  bool stale = !solved_at_ || solved_for_ != recommended;
  if (!stale) {
    double d2 = 0.0;
    for (std::size_t u = 0; u < plugin.size(); ++u) {
      const double d = plugin[u] - (*solved_at_)[u];
      d2 += d * d;
    }
    stale = std::sqrt(d2) > config_.resolve_distance;
  }
  if (!stale) return cached_q_;

  OracleOptions options;
  options.tol = config_.oracle_tol;
  options.max_iterations = config_.oracle_max_iterations;
  options.warm_start = cached_q_;
  try {
    cached_q_ = solve_oracle(plugin, *space_, recommended, options).q_star;
  } catch (const SolverError& e) {
    throw SolverError("step " + std::to_string(n_) + ": " + e.what(), e.best());
  }
  solved_at_ = plugin;
  solved_for_ = recommended;
  ++solves_;
  return cached_q_;
}

void TrackAndStop::record_observation(std::size_t control, double y) {
  if (!pending_) throw UsageError("record_observation called before next_control");
  if (*pending_ != control) {
    throw UsageError("observation recorded for control " + std::to_string(control + 1) + " but control " +
                     std::to_string(*pending_ + 1) + " was selected");
  }
  const double stat = space_->models()[control].suff_stat(y);
  pending_.reset();
  ++counts_[control];
  count_values_[control] = static_cast<double>(counts_[control]);
  sums_[control] += stat;
  ++n_;
  if (initialized()) {
    for (std::size_t m = 0; m < space_->num_hypotheses(); ++m) {
      log_likelihood_[m] = constrained_mle(space_->set(m), sums_, count_values_, space_->models()).log_likelihood;
    }
  }
}

ParamVector TrackAndStop::global_mle() const {
  require_initialized("global MLE");
  const auto models = space_->models();
  ParamVector theta(models.size());
  for (std::size_t u = 0; u < theta.size(); ++u) {
    const double mean = clamp_empirical_mean(models[u], sums_[u] / count_values_[u], count_values_[u]);
    theta[u] = models[u].natural_from_mean(mean);
  }
  return theta;
}

double TrackAndStop::glrt(std::size_t i, std::size_t j) const {
  require_initialized("GLRT");
  const std::size_t m = space_->num_hypotheses();
  if (i >= m || j >= m) throw PreconditionError("hypothesis index out of range");
  if (i == j) throw PreconditionError("GLRT needs two distinct hypotheses");
  return log_likelihood_[i] - log_likelihood_[j];
}

GlrtView TrackAndStop::z_stats() const {
  require_initialized("GLRT");
  const std::size_t m = space_->num_hypotheses();
  GlrtView view;
  view.hypotheses = m;
  view.pairwise.assign(m * m, 0.0);
  view.per_hypothesis.assign(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double z = log_likelihood_[i] - log_likelihood_[j];
      view.pairwise[i * m + j] = z;
      view.per_hypothesis[i] = std::min(view.per_hypothesis[i], z);
    }
  }
  view.overall = view.per_hypothesis[0];
  view.leader = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (view.per_hypothesis[i] > view.overall) {
      view.overall = view.per_hypothesis[i];
      view.leader = i;
    }
  }
  return view;
}

double TrackAndStop::current_threshold() const {
  return threshold(std::max<std::size_t>(n_, 1), config_.alpha, space_->num_controls());
}

bool TrackAndStop::should_stop() const {
  if (!initialized()) return false;
  return z_stats().overall >= current_threshold();
}

std::size_t TrackAndStop::recommend() const {
  const ParamVector theta = global_mle();
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < space_->num_hypotheses(); ++m) {
    const double d = distance(theta, space_->set(m), space_->models());
    if (d < best_dist) {
      best_dist = d;
      best = m;
    }
  }
  return best;
}

ParamVector TrackAndStop::plugin_estimate() const {
  return nearest_point(global_mle(), space_->set(recommend()), space_->models(), config_.rho);
}

std::size_t TrackAndStop::decide() const { return z_stats().leader; }

TrackingCheck TrackAndStop::check_tracking() const {
  const double dim = static_cast<double>(space_->num_controls());
  const double n = static_cast<double>(n_);
  const double floor = std::sqrt(n + dim * dim) - 2.0 * dim;
  TrackingCheck check{true, true, std::numeric_limits<double>::infinity(), 0.0, dim * (1.0 + std::sqrt(n))};
  for (std::size_t u = 0; u < counts_.size(); ++u) {
    check.count_margin = std::min(check.count_margin, count_values_[u] - floor);
    check.max_deviation = std::max(check.max_deviation, std::abs(count_values_[u] - tracked_[u]));
  }
  check.count_floor_ok = check.count_margin >= 0.0;
  check.deviation_ok = check.max_deviation <= check.deviation_limit;
  return check;
}

}  // namespace ctsense
