#include "ctsense/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

namespace ctsense {

namespace {

// SplitMix64 finalizer: decorrelates consecutive seeds before they reach the
// Mersenne Twister.
std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs job(i) for i in [0, count) on up to `parallelism` threads. Exceptions
// are collected per index and the lowest-index one is rethrown.
template <class Job>
void parallel_for(std::size_t count, std::size_t parallelism, Job&& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw TrialError(i, e.what());
    }
  }
}

std::size_t resolve_parallelism(std::size_t parallelism) {
  return parallelism == 0 ? default_parallelism() : parallelism;
}

}  // namespace

std::size_t Scenario::true_hypothesis() const {
  if (truth.size() != space.num_controls()) {
    throw ConfigError("truth has " + std::to_string(truth.size()) + " coordinates for " +
                      std::to_string(space.num_controls()) + " controls");
  }
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (!space.models()[u].in_domain(truth[u])) {
      throw ConfigError("truth coordinate " + std::to_string(u + 1) + " outside the natural domain");
    }
  }
  const auto m = space.classify(truth);
  if (!m) throw ConfigError("truth lies in no hypothesis set");
  return *m;
}

TrialResult run_trial(const Scenario& scenario, const PolicyConfig& config, std::uint64_t seed,
                      const TrialOptions& options) {
  const std::size_t truth_hypothesis = scenario.true_hypothesis();
  const auto models = scenario.space.models();
  Rng rng(mix_seed(seed));
  TrackAndStop policy(scenario.space, config);
  TrialResult result;
  result.seed = seed;
  while (true) {
    if (policy.steps() >= options.step_cap) {
      throw StepCapExceeded("no stop after " + std::to_string(options.step_cap) + " steps (seed " +
                            std::to_string(seed) + ")");
    }
    const std::size_t u = policy.next_control();
    policy.record_observation(u, models[u].sample(scenario.truth[u], rng));
    if (!policy.initialized()) continue;
    if (options.check_tracking) {
      const TrackingCheck check = policy.check_tracking();
      if (!check.count_floor_ok || !check.deviation_ok) ++result.tracking_violations;
    }
    if (policy.should_stop()) break;
  }
  result.stopping_time = policy.steps();
  result.decision = policy.decide();
  result.correct = result.decision == truth_hypothesis;
  result.final_counts.assign(policy.counts().begin(), policy.counts().end());
  return result;
}

std::size_t default_parallelism() {
  if (const char* env = std::getenv("CTSENSE_THREADS")) {
    char* end = nullptr;
    const unsigned long value = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<std::size_t>(value);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

RunSummary summarize(const std::vector<TrialResult>& trials, double alpha, double d_star) {
  RunSummary s;
  s.alpha = alpha;
  s.trials = trials.size();
  s.d_star = d_star;
  if (trials.empty()) return s;
  double sum = 0.0;
  std::size_t errors = 0;
  for (const TrialResult& t : trials) {
    sum += static_cast<double>(t.stopping_time);
    errors += t.correct ? 0 : 1;
    s.tracking_violations += t.tracking_violations;
  }
  const double count = static_cast<double>(trials.size());
  s.mean_tau = sum / count;
  double sq = 0.0;
  for (const TrialResult& t : trials) {
    const double d = static_cast<double>(t.stopping_time) - s.mean_tau;
    sq += d * d;
  }
  s.std_tau = trials.size() > 1 ? std::sqrt(sq / (count - 1.0)) : 0.0;
  s.error_rate = static_cast<double>(errors) / count;
  const double abs_log_alpha = std::abs(std::log(alpha));
  s.ratio = s.mean_tau / abs_log_alpha;
  s.lower_bound_ratio = d_star > 0.0 ? lower_bound(alpha, d_star) / abs_log_alpha : 0.0;
  return s;
}

BatchResult run_batch(const Scenario& scenario, const PolicyConfig& config, std::size_t trials,
                      std::uint64_t base_seed, std::size_t parallelism, const TrialOptions& options) {
  if (trials == 0) throw PreconditionError("a batch needs at least one trial");
  validate(config);
  const double d_star = solve_oracle(scenario.truth, scenario.space, scenario.true_hypothesis()).d_star;
  BatchResult batch;
  batch.trials.resize(trials);
  parallel_for(trials, resolve_parallelism(parallelism), [&](std::size_t k) {
    batch.trials[k] = run_trial(scenario, config, base_seed + k, options);
  });
  batch.summary = summarize(batch.trials, config.alpha, d_star);
  return batch;
}

std::vector<RunSummary> sweep_alpha(const Scenario& scenario, const PolicyConfig& config,
                                    const std::vector<double>& alphas, std::size_t trials,
                                    std::uint64_t base_seed, std::size_t parallelism,
                                    const TrialOptions& options) {
  std::vector<RunSummary> table;
  table.reserve(alphas.size());
  for (double alpha : alphas) {
    PolicyConfig c = config;
    c.alpha = alpha;
    table.push_back(run_batch(scenario, c, trials, base_seed, parallelism, options).summary);
  }
  return table;
}

double concentration_floor(std::size_t num_controls) {
  return static_cast<double>(num_controls) + 1.0 + std::log(2.0);
}

double concentration_bound(double beta, std::size_t n, std::size_t num_controls) {
  if (n == 0) throw DomainError("concentration bound needs n >= 1");
  if (!(beta >= concentration_floor(num_controls))) {
    throw DomainError("beta must be at least |U| + 1 + log 2");
  }
  const double u = static_cast<double>(num_controls);
  const double levels = std::ceil(beta * std::log(static_cast<double>(n)));
  // Evaluate in logs; the bound is astronomically large for moderate beta.
  const double log_bound = std::log(2.0) - beta + u * std::log(beta * levels / u) + u + 1.0;
  if (levels <= 0.0) return 0.0;
  return std::exp(log_bound);
}

std::vector<ConcentrationRow> verify_concentration(std::span<const ExpFamilyModel> models,
                                                   std::span<const double> truth, std::size_t n,
                                                   const std::vector<double>& betas, std::size_t samples,
                                                   std::uint64_t seed, std::size_t parallelism) {
  const std::size_t dim = models.size();
  if (dim == 0 || truth.size() != dim) throw PreconditionError("truth must have one entry per model");
  if (n == 0) throw PreconditionError("run length must be positive");
  if (samples < 10'000) throw PreconditionError("concentration check needs at least 10^4 samples");
  for (double beta : betas) {
    if (!(beta >= concentration_floor(dim))) throw DomainError("beta below |U| + 1 + log 2");
  }
  for (std::size_t u = 0; u < dim; ++u) {
    if (!models[u].in_domain(truth[u])) throw DomainError("truth outside the natural domain");
  }

  std::vector<double> statistic(samples);
  parallel_for(samples, resolve_parallelism(parallelism), [&](std::size_t s) {
    Rng rng(mix_seed(seed + s));
    std::uniform_int_distribution<std::size_t> pick(0, dim - 1);
    std::vector<double> counts(dim, 0.0);
    std::vector<double> sums(dim, 0.0);
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t u = pick(rng);
      counts[u] += 1.0;
      sums[u] += models[u].suff_stat(models[u].sample(truth[u], rng));
    }
    double total = 0.0;
    for (std::size_t u = 0; u < dim; ++u) {
      if (counts[u] == 0.0) continue;
      const double mean = clamp_empirical_mean(models[u], sums[u] / counts[u], counts[u]);
      total += counts[u] * models[u].kl(models[u].natural_from_mean(mean), truth[u]);
    }
    statistic[s] = total;
  });

  std::vector<ConcentrationRow> rows;
  rows.reserve(betas.size());
  const double count = static_cast<double>(samples);
  for (double beta : betas) {
    const auto hits = std::count_if(statistic.begin(), statistic.end(), [&](double v) { return v >= beta; });
    ConcentrationRow row;
    row.beta = beta;
    row.empirical = static_cast<double>(hits) / count;
    row.bound = concentration_bound(beta, n, dim);
    row.std_error = std::sqrt(row.empirical * (1.0 - row.empirical) / count);
    row.pass = row.empirical <= row.bound + 3.0 * row.std_error;
    rows.push_back(row);
  }
  return rows;
}

ConvergenceTrace run_without_stopping(const Scenario& scenario, const PolicyConfig& config,
                                      std::size_t horizon, std::uint64_t seed,
                                      const std::vector<std::size_t>& checkpoints) {
  const std::size_t truth_hypothesis = scenario.true_hypothesis();
  const auto models = scenario.space.models();
  Rng rng(mix_seed(seed));
  TrackAndStop policy(scenario.space, config);
  ConvergenceTrace trace;
  std::vector<std::size_t> marks = checkpoints;
  marks.push_back(horizon);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  std::size_t next_mark = 0;
  while (policy.steps() < horizon) {
    const std::size_t u = policy.next_control();
    policy.record_observation(u, models[u].sample(scenario.truth[u], rng));
    if (!policy.initialized()) continue;
    const TrackingCheck check = policy.check_tracking();
    if (!check.count_floor_ok || !check.deviation_ok) ++trace.tracking_violations;
    while (next_mark < marks.size() && marks[next_mark] < policy.steps()) ++next_mark;
    if (next_mark < marks.size() && marks[next_mark] == policy.steps()) {
      const ParamVector mle = policy.global_mle();
      double err = 0.0;
      for (std::size_t k = 0; k < mle.size(); ++k) err += (mle[k] - scenario.truth[k]) * (mle[k] - scenario.truth[k]);
      trace.checkpoints.push_back(policy.steps());
      trace.mle_error.push_back(std::sqrt(err));
      trace.rate.push_back(policy.z_stats().per_hypothesis[truth_hypothesis] / static_cast<double>(policy.steps()));
      ++next_mark;
    }
  }
  trace.final_counts.assign(policy.counts().begin(), policy.counts().end());
  return trace;
}

}  // namespace ctsense
