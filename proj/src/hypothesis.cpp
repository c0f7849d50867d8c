#include "ctsense/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ctsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Separable objective sum_u w_u * loss_u(x_u), each loss convex in x_u with
// its minimum at argmin(u).
//   Euclidean:  loss_u(x) = (x - anchor_u)^2 / 2, anchor in natural coordinates
//   Divergence: loss_u(x) = D_u(anchor_u || x), anchor in mean coordinates
struct Objective {
  enum class Kind { Euclidean, Divergence };

  Kind kind;
  std::span<const double> anchor;
  std::span<const double> weights;
  std::span<const ExpFamilyModel> models;

  double argmin(std::size_t u) const {
    if (kind == Kind::Euclidean) return anchor[u];
    return models[u].natural_from_mean(anchor[u]);
  }

  double anchor_mean(std::size_t u) const {
    if (kind == Kind::Divergence) return anchor[u];
    return models[u].mean_param(anchor[u]);
  }

  double slope(std::size_t u, double x, double w) const {
    if (kind == Kind::Euclidean) return w * (x - anchor[u]);
    return w * (models[u].mean_param(x) - anchor[u]);
  }

  double loss(std::size_t u, double x, double w) const {
    if (w == 0.0) return 0.0;
    if (kind == Kind::Euclidean) {
      const double d = x - anchor[u];
      return 0.5 * w * d * d;
    }
    return w * models[u].kl_from_mean(anchor[u], x);
  }
};

bool homogeneous(std::span<const ExpFamilyModel> models, std::span<const std::size_t> idx) {
  return std::all_of(idx.begin(), idx.end(), [&](std::size_t u) {
    return models[u].same_log_partition(models[idx.front()]);
  });
}

// Root of an increasing function on [lo, hi] by bisection.
template <class F>
double bisect_increasing(F&& f, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Minimizer of sum_{i in idx} w_i loss_i(c) over a common natural value c.
// Zero total weight falls back to unit weights.
double common_value(const Objective& obj, std::span<const std::size_t> idx) {
  double total = 0.0;
  for (std::size_t i : idx) total += obj.weights[i];
  const bool unit = !(total > 0.0);
  auto weight = [&](std::size_t i) { return unit ? 1.0 : obj.weights[i]; };
  if (unit) total = static_cast<double>(idx.size());

  if (homogeneous(obj.models, idx)) {
    double pooled = 0.0;
    for (std::size_t i : idx) pooled += weight(i) * obj.anchor[i];
    pooled /= total;
    if (obj.kind == Objective::Kind::Euclidean) return pooled;
    return obj.models[idx.front()].natural_from_mean(pooled);
  }

  double lo = kInf;
  double hi = -kInf;
  bool has_negative_domain = false;
  for (std::size_t i : idx) {
    const double a = obj.argmin(i);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    has_negative_domain |= obj.models[i].natural_domain().hi <= 0.0;
  }
  if (has_negative_domain) hi = std::min(hi, -std::numeric_limits<double>::min());
  if (lo >= hi) return lo;
  auto gradient = [&](double c) {
    double g = 0.0;
    for (std::size_t i : idx) g += obj.slope(i, c, weight(i));
    return g;
  };
  return bisect_increasing(gradient, lo, hi);
}

ParamVector fit_box(const BoxCell& box, const Objective& obj) {
  ParamVector x(obj.anchor.size());
  for (std::size_t u = 0; u < x.size(); ++u) x[u] = std::clamp(obj.argmin(u), box.lo[u], box.hi[u]);
  return x;
}

ParamVector fit_anomaly(const AnomalyCell& cell, const Objective& obj) {
  const std::size_t dim = obj.anchor.size();
  std::vector<std::size_t> others;
  for (std::size_t u = 0; u < dim; ++u) {
    if (u != cell.stream) others.push_back(u);
  }
  const double c = common_value(obj, others);
  const double y = obj.argmin(cell.stream);
  const bool feasible = cell.side == AnomalySide::Above ? y >= c : y <= c;
  if (feasible) {
    ParamVector x(dim, c);
    x[cell.stream] = y;
    return x;
  }
  std::vector<std::size_t> all(dim);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return ParamVector(dim, common_value(obj, all));
}

ParamVector fit_order(const OrderCell& cell, const Objective& obj) {
  const std::size_t dim = obj.anchor.size();
  std::vector<bool> is_top(dim, false);
  for (std::size_t a : cell.top) is_top[a] = true;

  ParamVector best(dim);
  for (std::size_t u = 0; u < dim; ++u) best[u] = obj.argmin(u);

  std::vector<std::size_t> all(dim);
  std::iota(all.begin(), all.end(), std::size_t{0});

  if (homogeneous(obj.models, all)) {
    // Shared log-partition: mean order equals natural order, and the
    // objective is convex in the common natural level s.
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t u = 0; u < dim; ++u) {
      if (is_top[u]) {
        lo = std::min(lo, best[u]);
      } else {
        hi = std::max(hi, best[u]);
      }
    }
    if (lo >= hi) return best;
    auto gradient = [&](double s) {
      double g = 0.0;
      for (std::size_t u = 0; u < dim; ++u) {
        if (is_top[u] ? best[u] < s : best[u] > s) g += obj.slope(u, s, obj.weights[u]);
      }
      return g;
    };
    const double s = bisect_increasing(gradient, lo, hi);
    for (std::size_t u = 0; u < dim; ++u) {
      best[u] = is_top[u] ? std::max(best[u], s) : std::min(best[u], s);
    }
    return best;
  }

  // Mixed families: search the common mean level t directly.
  std::vector<double> kappa(dim);
  double lo = kInf;
  double hi = -kInf;
  double image_lo = -kInf;
  double image_hi = kInf;
  for (std::size_t u = 0; u < dim; ++u) {
    kappa[u] = obj.anchor_mean(u);
    if (is_top[u]) {
      lo = std::min(lo, kappa[u]);
    } else {
      hi = std::max(hi, kappa[u]);
    }
    image_lo = std::max(image_lo, obj.models[u].mean_image().lo);
    image_hi = std::min(image_hi, obj.models[u].mean_image().hi);
  }
  if (lo >= hi) return best;
  const double margin = 1e-9;
  lo = std::max(lo, image_lo + margin);
  hi = std::min(hi, image_hi - margin);
  if (!(lo < hi)) throw ConfigError("order cell over mixed families has no common mean level");

  auto place = [&](double t, ParamVector& x) {
    for (std::size_t u = 0; u < dim; ++u) {
      const bool moved = is_top[u] ? kappa[u] < t : kappa[u] > t;
      x[u] = moved ? obj.models[u].natural_from_mean(t) : obj.argmin(u);
    }
  };
  ParamVector x(dim);
  auto value = [&](double t) {
    place(t, x);
    double v = 0.0;
    for (std::size_t u = 0; u < dim; ++u) v += obj.loss(u, x[u], obj.weights[u]);
    return v;
  };
  constexpr int kGrid = 256;
  int best_k = 0;
  double best_v = kInf;
  for (int k = 0; k <= kGrid; ++k) {
    const double v = value(lo + (hi - lo) * k / kGrid);
    if (v < best_v) {
      best_v = v;
      best_k = k;
    }
  }
  double a = lo + (hi - lo) * std::max(best_k - 1, 0) / kGrid;
  double b = lo + (hi - lo) * std::min(best_k + 1, kGrid) / kGrid;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = value(c);
  double fd = value(d);
  for (int it = 0; it < 120 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = value(d);
    }
  }
  const double t = 0.5 * (a + b);
  place(value(t) <= best_v ? t : lo + (hi - lo) * best_k / kGrid, best);
  return best;
}

ParamVector fit_cell(const ConvexCell& cell, const Objective& obj) {
  return std::visit(Overloaded{
                        [&](const BoxCell& c) { return fit_box(c, obj); },
                        [&](const AnomalyCell& c) { return fit_anomaly(c, obj); },
                        [&](const OrderCell& c) { return fit_order(c, obj); },
                    },
                    cell);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double equality_tolerance(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

// Direction pointing from a boundary point of the cell into its interior.
std::vector<double> interior_direction(const ConvexCell& cell, std::span<const double> p,
                                       std::span<const ExpFamilyModel> models) {
  std::vector<double> dir(p.size(), 0.0);
  if (const auto* anomaly = std::get_if<AnomalyCell>(&cell)) {
    dir[anomaly->stream] = anomaly->side == AnomalySide::Above ? 1.0 : -1.0;
  } else if (const auto* order = std::get_if<OrderCell>(&cell)) {
    std::vector<bool> is_top(p.size(), false);
    for (std::size_t a : order->top) is_top[a] = true;
    double top_min = kInf;
    double bottom_max = -kInf;
    for (std::size_t u = 0; u < p.size(); ++u) {
      const double k = models[u].mean_param(p[u]);
      if (is_top[u]) {
        top_min = std::min(top_min, k);
      } else {
        bottom_max = std::max(bottom_max, k);
      }
    }
    for (std::size_t u = 0; u < p.size(); ++u) {
      const double k = models[u].mean_param(p[u]);
      if (is_top[u] && k <= bottom_max + equality_tolerance(bottom_max)) dir[u] = 1.0;
      if (!is_top[u] && k >= top_min - equality_tolerance(top_min)) dir[u] = -1.0;
    }
  }
  return dir;
}

bool in_domains(std::span<const double> x, std::span<const ExpFamilyModel> models) {
  for (std::size_t u = 0; u < x.size(); ++u) {
    if (!std::isfinite(x[u]) || !models[u].in_domain(x[u])) return false;
  }
  return true;
}

struct Projection {
  ParamVector point;
  double dist;
  std::size_t cell;
};

Projection project(std::span<const double> theta, const HypothesisSet& set,
                   std::span<const ExpFamilyModel> models) {
  if (set.empty()) throw PreconditionError("hypothesis set has no cells");
  const std::vector<double> unit(theta.size(), 1.0);
  const Objective obj{Objective::Kind::Euclidean, theta, unit, models};
  Projection best{{}, kInf, 0};
  for (std::size_t k = 0; k < set.size(); ++k) {
    ParamVector p = fit_cell(set[k], obj);
    const double d = euclidean(p, theta);
    if (d < best.dist) best = {std::move(p), d, k};
  }
  return best;
}

void require_dimension(std::span<const double> v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw PreconditionError(std::string(what) + " has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(dim));
  }
}

}  // namespace

HypothesisSet anomaly_hypothesis(std::size_t stream) {
  return {AnomalyCell{stream, AnomalySide::Above}, AnomalyCell{stream, AnomalySide::Below}};
}

HypothesisSpace::HypothesisSpace(std::vector<ExpFamilyModel> models, std::vector<HypothesisSet> sets)
    : models_(std::move(models)), sets_(std::move(sets)) {
  const std::size_t dim = models_.size();
  if (dim == 0) throw ConfigError("at least one control is required");
  if (sets_.size() < 2) throw ConfigError("at least two hypotheses are required");
  for (std::size_t m = 0; m < sets_.size(); ++m) {
    const std::string where = "hypothesis " + std::to_string(m + 1);
    if (sets_[m].empty()) throw ConfigError(where + ": no cells");
    for (std::size_t k = 0; k < sets_[m].size(); ++k) {
      const std::string cell_where = where + ", cell " + std::to_string(k + 1);
      std::visit(Overloaded{
                     [&](const BoxCell& box) {
                       if (box.lo.size() != dim || box.hi.size() != dim) {
                         throw ConfigError(cell_where + ": box bounds must have one entry per control");
                       }
                       for (std::size_t u = 0; u < dim; ++u) {
                         const std::string coord = cell_where + ", control " + std::to_string(u + 1);
                         if (!std::isfinite(box.lo[u]) || !std::isfinite(box.hi[u])) {
                           throw ConfigError(coord + ": box bounds must be finite");
                         }
                         if (box.lo[u] > box.hi[u]) throw ConfigError(coord + ": lo > hi");
                         if (!models_[u].in_domain(box.lo[u]) || !models_[u].in_domain(box.hi[u])) {
                           throw ConfigError(coord + ": box leaves the natural domain");
                         }
                       }
                     },
                     [&](const AnomalyCell& cell) {
                       if (dim < 2) throw ConfigError(cell_where + ": anomaly cells need at least two controls");
                       if (cell.stream >= dim) throw ConfigError(cell_where + ": anomalous stream out of range");
                     },
                     [&](const OrderCell& cell) {
                       if (cell.top.empty() || cell.top.size() >= dim) {
                         throw ConfigError(cell_where + ": order cell needs between 1 and |U|-1 top controls");
                       }
                       std::vector<bool> seen(dim, false);
                       for (std::size_t a : cell.top) {
                         if (a >= dim) throw ConfigError(cell_where + ": top control out of range");
                         if (seen[a]) throw ConfigError(cell_where + ": duplicate top control");
                         seen[a] = true;
                       }
                     },
                 },
                 sets_[m][k]);
    }
  }
}

std::optional<std::size_t> HypothesisSpace::classify(std::span<const double> theta) const {
  require_dimension(theta, num_controls(), "parameter vector");
  for (std::size_t m = 0; m < sets_.size(); ++m) {
    for (const ConvexCell& cell : sets_[m]) {
      if (cell_contains(cell, theta, models_)) return m;
    }
  }
  return std::nullopt;
}

bool cell_contains(const ConvexCell& cell, std::span<const double> theta,
                   std::span<const ExpFamilyModel> models) {
  if (!in_domains(theta, models)) return false;
  return std::visit(
      Overloaded{
          [&](const BoxCell& box) {
            for (std::size_t u = 0; u < theta.size(); ++u) {
              if (theta[u] < box.lo[u] || theta[u] > box.hi[u]) return false;
            }
            return true;
          },
          [&](const AnomalyCell& a) {
            double lo = kInf;
            double hi = -kInf;
            for (std::size_t u = 0; u < theta.size(); ++u) {
              if (u == a.stream) continue;
              lo = std::min(lo, theta[u]);
              hi = std::max(hi, theta[u]);
            }
            if (hi - lo > equality_tolerance(hi)) return false;
            const double c = 0.5 * (lo + hi);
            const double gap = theta[a.stream] - c;
            const double tol = equality_tolerance(c);
            return a.side == AnomalySide::Above ? gap > tol : gap < -tol;
          },
          [&](const OrderCell& o) {
            std::vector<bool> is_top(theta.size(), false);
            for (std::size_t t : o.top) is_top[t] = true;
            double top_min = kInf;
            double bottom_max = -kInf;
            for (std::size_t u = 0; u < theta.size(); ++u) {
              const double k = models[u].mean_param(theta[u]);
              if (is_top[u]) {
                top_min = std::min(top_min, k);
              } else {
                bottom_max = std::max(bottom_max, k);
              }
            }
            return top_min > bottom_max;
          },
      },
      cell);
}

double distance(std::span<const double> theta, const HypothesisSet& set,
                std::span<const ExpFamilyModel> models) {
  require_dimension(theta, models.size(), "parameter vector");
  return project(theta, set, models).dist;
}

ParamVector nearest_point(std::span<const double> theta, const HypothesisSet& set,
                          std::span<const ExpFamilyModel> models, double rho) {
  require_dimension(theta, models.size(), "parameter vector");
  if (!(rho >= 1.0)) throw PreconditionError("rho must be at least 1");
  Projection proj = project(theta, set, models);
  const ConvexCell& cell = set[proj.cell];
  if (proj.dist == 0.0 || rho == 1.0 || cell_contains(cell, proj.point, models)) return proj.point;

  // No minimizer inside the open cell: step from the projection into the
  // interior while staying within rho' * dist, rho' = (1 + rho) / 2.
  const std::vector<double> dir = interior_direction(cell, proj.point, models);
  double dir_sq = 0.0;
  double cross = 0.0;
  for (std::size_t u = 0; u < dir.size(); ++u) {
    dir_sq += dir[u] * dir[u];
    cross += dir[u] * (proj.point[u] - theta[u]);
  }
  if (dir_sq == 0.0) return proj.point;
  const double rho_inner = 0.5 * (1.0 + rho);
  const double slack = (rho_inner * rho_inner - 1.0) * proj.dist * proj.dist;
  double step = (-cross + std::sqrt(cross * cross + dir_sq * slack)) / dir_sq;
  ParamVector candidate(theta.size());
  for (int attempt = 0; attempt < 64 && step > 0.0; ++attempt, step *= 0.5) {
    for (std::size_t u = 0; u < dir.size(); ++u) candidate[u] = proj.point[u] + step * dir[u];
    if (cell_contains(cell, candidate, models)) return candidate;
  }
  return proj.point;
}

MleResult constrained_mle(const HypothesisSet& set, std::span<const double> stat_sums,
                          std::span<const double> counts, std::span<const ExpFamilyModel> models) {
  const std::size_t dim = models.size();
  require_dimension(stat_sums, dim, "statistic sums");
  require_dimension(counts, dim, "counts");
  if (set.empty()) throw PreconditionError("hypothesis set has no cells");
  std::vector<double> means(dim);
  for (std::size_t u = 0; u < dim; ++u) {
    if (!(counts[u] >= 1.0)) {
      throw PreconditionError("control " + std::to_string(u + 1) + " has no observations");
    }
    means[u] = clamp_empirical_mean(models[u], stat_sums[u] / counts[u], counts[u]);
  }
  const Objective obj{Objective::Kind::Divergence, means, counts, models};
  MleResult best{{}, -kInf, 0};
  for (std::size_t k = 0; k < set.size(); ++k) {
    ParamVector x = fit_cell(set[k], obj);
    double ll = 0.0;
    for (std::size_t u = 0; u < dim; ++u) ll += x[u] * stat_sums[u] - counts[u] * models[u].log_partition(x[u]);
    if (ll > best.log_likelihood) best = {std::move(x), ll, k};
  }
  return best;
}

void require_proportions(std::span<const double> q, std::size_t size) {
  require_dimension(q, size, "proportions");
  double total = 0.0;
  for (double w : q) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("proportions must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("proportions must sum to 1");
}

KlInfResult weighted_kl_inf(std::span<const double> theta, std::span<const double> q,
                            const HypothesisSet& set, std::span<const ExpFamilyModel> models) {
  const std::size_t dim = models.size();
  require_dimension(theta, dim, "parameter vector");
  require_proportions(q, dim);
  if (set.empty()) throw PreconditionError("hypothesis set has no cells");
  std::vector<double> means(dim);
  for (std::size_t u = 0; u < dim; ++u) means[u] = models[u].mean_param(theta[u]);
  const Objective obj{Objective::Kind::Divergence, means, q, models};
  KlInfResult best{kInf, {}, 0};
  for (std::size_t k = 0; k < set.size(); ++k) {
    ParamVector x = fit_cell(set[k], obj);
    double v = 0.0;
    for (std::size_t u = 0; u < dim; ++u) {
      if (q[u] > 0.0) v += q[u] * models[u].kl(theta[u], x[u]);
    }
    if (v < best.value) best = {v, std::move(x), k};
  }
  return best;
}

namespace {

Interval sampling_window(const ExpFamilyModel& model) {
  if (model.family() == Family::Exponential) return {-5.0, -0.05};
  return {-5.0, 5.0};
}

std::optional<ParamVector> sample_cell(const ConvexCell& cell, std::span<const ExpFamilyModel> models,
                                       Rng& rng) {
  const std::size_t dim = models.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  return std::visit(
      Overloaded{
          [&](const BoxCell& box) -> std::optional<ParamVector> {
            ParamVector x(dim);
            for (std::size_t u = 0; u < dim; ++u) x[u] = draw(box.lo[u], box.hi[u]);
            return x;
          },
          [&](const AnomalyCell& a) -> std::optional<ParamVector> {
            Interval common{-kInf, kInf};
            for (std::size_t u = 0; u < dim; ++u) {
              const Interval w = sampling_window(models[u]);
              common.lo = std::max(common.lo, w.lo);
              common.hi = std::min(common.hi, w.hi);
            }
            for (int attempt = 0; attempt < 100; ++attempt) {
              const double c = draw(common.lo, common.hi);
              const double offset = draw(0.05, 2.5);
              ParamVector x(dim, c);
              x[a.stream] = a.side == AnomalySide::Above ? c + offset : c - offset;
              if (cell_contains(cell, x, models)) return x;
            }
            return std::nullopt;
          },
          [&](const OrderCell&) -> std::optional<ParamVector> {
            ParamVector x(dim);
            for (int attempt = 0; attempt < 1000; ++attempt) {
              for (std::size_t u = 0; u < dim; ++u) {
                const Interval w = sampling_window(models[u]);
                x[u] = draw(w.lo, w.hi);
              }
              if (cell_contains(cell, x, models)) return x;
            }
            return std::nullopt;
          },
      },
      cell);
}

}  // namespace

std::vector<OverlapFinding> find_overlaps(const HypothesisSpace& space, std::size_t samples_per_cell,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OverlapFinding> findings;
  const auto& sets = space.sets();
  for (std::size_t h = 0; h < sets.size(); ++h) {
    for (std::size_t c = 0; c < sets[h].size(); ++c) {
      std::vector<std::vector<bool>> reported(sets.size());
      for (std::size_t h2 = 0; h2 < sets.size(); ++h2) reported[h2].assign(sets[h2].size(), false);
      for (std::size_t s = 0; s < samples_per_cell; ++s) {
        const auto point = sample_cell(sets[h][c], space.models(), rng);
        if (!point) continue;
        for (std::size_t h2 = 0; h2 < sets.size(); ++h2) {
          if (h2 == h) continue;
          for (std::size_t c2 = 0; c2 < sets[h2].size(); ++c2) {
            if (reported[h2][c2]) continue;
            const HypothesisSet single{sets[h2][c2]};
            if (distance(*point, single, space.models()) <= 1e-12) {
              findings.push_back({{h, c}, {h2, c2}, *point});
              reported[h2][c2] = true;
            }
          }
        }
      }
    }
  }
  return findings;
}

}  // namespace ctsense
