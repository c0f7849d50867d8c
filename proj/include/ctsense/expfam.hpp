#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ctsense {

/// Random source used by every sampler in the library.
using Rng = std::mt19937_64;

/// Thrown when a natural parameter (or an observation) lies outside the
/// family's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when an expectation parameter lies outside the image of the mean map.
class MeanDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Family { Gaussian, Bernoulli, Poisson, Exponential };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

/// Open real interval (lo, hi); infinite ends allowed.
struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return x > lo && x < hi; }
};

/// One control's single-parameter exponential family in natural form:
///   p(y; theta) = h(y) exp(theta * T(y) - A(theta)).
///
/// Gaussian uses known sigma and T(y) = y / sigma, so theta = mu / sigma and
/// A(theta) = theta^2 / 2. Exponential is parametrized by theta = -rate.
class ExpFamilyModel {
 public:
  static ExpFamilyModel gaussian(double sigma);
  static ExpFamilyModel bernoulli();
  static ExpFamilyModel poisson();
  static ExpFamilyModel exponential();

  Family family() const { return family_; }
  /// Known standard deviation; 1 for non-Gaussian families.
  double sigma() const { return sigma_; }

  Interval natural_domain() const;
  /// Open image of the mean map over the natural domain.
  Interval mean_image() const;
  bool in_domain(double theta) const { return natural_domain().contains(theta); }

  double log_partition(double theta) const;
  double mean_param(double theta) const;
  double natural_from_mean(double kappa) const;
  /// Convex conjugate b(kappa) of the log-partition. Defined on the closure
  /// of the mean image where the limit is finite (e.g. Bernoulli b(0) = 0).
  double conjugate(double kappa) const;
  /// Second derivative of A: the variance of T(Y).
  double variance(double theta) const;

  /// KL divergence D(theta || theta').
  double kl(double theta, double theta_prime) const;

  /// Same as kl() with the first argument given in mean coordinates; the mean
  /// may sit on the closure of the image (0 for Bernoulli/Poisson).
  double kl_from_mean(double kappa, double theta_prime) const;

  double suff_stat(double y) const;
  double sample(double theta, Rng& rng) const;

  /// Models sharing the same log-partition function A (and so the same
  /// divergence geometry in natural coordinates).
  bool same_log_partition(const ExpFamilyModel& other) const;

  friend bool operator==(const ExpFamilyModel&, const ExpFamilyModel&) = default;

 private:
  ExpFamilyModel(Family family, double sigma) : family_(family), sigma_(sigma) {}
  void require_domain(double theta) const;

  Family family_;
  double sigma_;
};

/// Mean parameter clamped into the open image using a count-dependent
/// offset: empirical means on the boundary (e.g. all-zero Bernoulli data) are
/// moved inward by 1 / (2 count) before inversion.
double clamp_empirical_mean(const ExpFamilyModel& model, double mean, double count);

}  // namespace ctsense
