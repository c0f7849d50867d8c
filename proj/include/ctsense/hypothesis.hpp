#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ctsense/expfam.hpp"

namespace ctsense {

/// One natural parameter per control.
using ParamVector = std::vector<double>;

/// Invalid hypothesis-space or scenario configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated call precondition (zero counts, bad proportions, bad indices).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed axis-aligned box in natural-parameter space.
struct BoxCell {
  std::vector<double> lo;
  std::vector<double> hi;
  friend bool operator==(const BoxCell&, const BoxCell&) = default;
};

enum class AnomalySide { Above, Below };

/// Half of the "stream m is anomalous" plane: every other coordinate equals a
/// common value c, and theta_m lies strictly above (or below) c.
struct AnomalyCell {
  std::size_t stream;
  AnomalySide side;
  friend bool operator==(const AnomalyCell&, const AnomalyCell&) = default;
};

/// Best-K cell: every listed control has a strictly larger expectation
/// parameter than every unlisted control.
struct OrderCell {
  std::vector<std::size_t> top;
  friend bool operator==(const OrderCell&, const OrderCell&) = default;
};

using ConvexCell = std::variant<BoxCell, AnomalyCell, OrderCell>;

/// A hypothesis set: a union of disjoint convex cells.
using HypothesisSet = std::vector<ConvexCell>;

/// Anomaly hypothesis for `stream`: both half-cells.
HypothesisSet anomaly_hypothesis(std::size_t stream);

class HypothesisSpace {
 public:
  /// Validates the structure of every cell against the models; throws
  /// ConfigError naming the offending hypothesis/cell.
  HypothesisSpace(std::vector<ExpFamilyModel> models, std::vector<HypothesisSet> sets);

  std::size_t num_controls() const { return models_.size(); }
  std::size_t num_hypotheses() const { return sets_.size(); }
  std::span<const ExpFamilyModel> models() const { return models_; }
  const std::vector<HypothesisSet>& sets() const { return sets_; }
  const HypothesisSet& set(std::size_t m) const { return sets_.at(m); }

  /// Index of the hypothesis containing theta (lowest index on ties).
  std::optional<std::size_t> classify(std::span<const double> theta) const;

  friend bool operator==(const HypothesisSpace&, const HypothesisSpace&) = default;

 private:
  std::vector<ExpFamilyModel> models_;
  std::vector<HypothesisSet> sets_;
};

/// Membership in the cell itself (boxes are closed, anomaly and order cells
/// are open in their affine hulls).
bool cell_contains(const ConvexCell& cell, std::span<const double> theta,
                   std::span<const ExpFamilyModel> models);

/// Euclidean distance from theta to the closure of the set.
double distance(std::span<const double> theta, const HypothesisSet& set,
                std::span<const ExpFamilyModel> models);

/// A point of the set's closure within rho times the distance to the set.
/// When the exact projection falls on an excluded boundary (anomaly line,
/// order ties) and rho > 1, the point is pushed into the cell's interior.
ParamVector nearest_point(std::span<const double> theta, const HypothesisSet& set,
                          std::span<const ExpFamilyModel> models, double rho);

struct MleResult {
  ParamVector point;
  double log_likelihood;
  std::size_t cell;
};

/// Maximizer of sum_u [theta'_u S_u - N_u A_u(theta'_u)] over the closure of
/// the set. Empirical means on the boundary of the mean image are clamped
/// with clamp_empirical_mean before fitting free coordinates.
MleResult constrained_mle(const HypothesisSet& set, std::span<const double> stat_sums,
                          std::span<const double> counts, std::span<const ExpFamilyModel> models);

struct KlInfResult {
  double value;
  ParamVector point;
  std::size_t cell;
};

/// inf over the closure of the set of sum_u q_u D_u(theta || theta').
KlInfResult weighted_kl_inf(std::span<const double> theta, std::span<const double> q,
                            const HypothesisSet& set, std::span<const ExpFamilyModel> models);

/// Throws PreconditionError unless q is a probability vector of the right size.
void require_proportions(std::span<const double> q, std::size_t size);

struct CellRef {
  std::size_t hypothesis;
  std::size_t cell;
};

struct OverlapFinding {
  CellRef sampled;
  CellRef other;
  ParamVector witness;
};

/// Sampling check that cells of different hypotheses are separated: draws
/// points from every cell and reports each one found at zero distance from a
/// cell of another hypothesis (at most one finding per cell pair).
std::vector<OverlapFinding> find_overlaps(const HypothesisSpace& space,
                                          std::size_t samples_per_cell, std::uint64_t seed);

}  // namespace ctsense
