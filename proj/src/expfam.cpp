#include "ctsense/expfam.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ctsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + e^x) without overflow.
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// x log x with the 0 log 0 = 0 convention.
double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

std::string describe(double value) {
  std::ostringstream os;
  os << value;
  return os.str();
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::Poisson: return "poisson";
    case Family::Exponential: return "exponential";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "bernoulli") return Family::Bernoulli;
  if (name == "poisson") return Family::Poisson;
  if (name == "exponential") return Family::Exponential;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

ExpFamilyModel ExpFamilyModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("gaussian sigma must be positive and finite, got " + describe(sigma));
  }
  return ExpFamilyModel(Family::Gaussian, sigma);
}

ExpFamilyModel ExpFamilyModel::bernoulli() { return ExpFamilyModel(Family::Bernoulli, 1.0); }
ExpFamilyModel ExpFamilyModel::poisson() { return ExpFamilyModel(Family::Poisson, 1.0); }
ExpFamilyModel ExpFamilyModel::exponential() { return ExpFamilyModel(Family::Exponential, 1.0); }

Interval ExpFamilyModel::natural_domain() const {
  if (family_ == Family::Exponential) return {-kInf, 0.0};
  return {-kInf, kInf};
}

Interval ExpFamilyModel::mean_image() const {
  switch (family_) {
    case Family::Gaussian: return {-kInf, kInf};
    case Family::Bernoulli: return {0.0, 1.0};
    case Family::Poisson:
    case Family::Exponential: return {0.0, kInf};
  }
  return {-kInf, kInf};
}

void ExpFamilyModel::require_domain(double theta) const {
  if (!std::isfinite(theta) || !in_domain(theta)) {
    throw DomainError("natural parameter " + describe(theta) + " outside the " +
                      std::string(to_string(family_)) + " domain");
  }
}

double ExpFamilyModel::log_partition(double theta) const {
  require_domain(theta);
  switch (family_) {
    case Family::Gaussian: return 0.5 * theta * theta;
    case Family::Bernoulli: return softplus(theta);
    case Family::Poisson: return std::exp(theta);
    case Family::Exponential: return -std::log(-theta);
  }
  return 0.0;
}

double ExpFamilyModel::mean_param(double theta) const {
  require_domain(theta);
  switch (family_) {
    case Family::Gaussian: return theta;
    case Family::Bernoulli: return logistic(theta);
    case Family::Poisson: return std::exp(theta);
    case Family::Exponential: return -1.0 / theta;
  }
  return 0.0;
}

double ExpFamilyModel::natural_from_mean(double kappa) const {
  if (!std::isfinite(kappa) || !mean_image().contains(kappa)) {
    throw MeanDomainError("mean parameter " + describe(kappa) + " outside the " +
                          std::string(to_string(family_)) + " mean image");
  }
  switch (family_) {
    case Family::Gaussian: return kappa;
    case Family::Bernoulli: return std::log(kappa) - std::log1p(-kappa);
    case Family::Poisson: return std::log(kappa);
    case Family::Exponential: return -1.0 / kappa;
  }
  return 0.0;
}

double ExpFamilyModel::conjugate(double kappa) const {
  const Interval image = mean_image();
  const bool on_closure = kappa >= image.lo && kappa <= image.hi && std::isfinite(kappa);
  if (!on_closure) {
    throw MeanDomainError("mean parameter " + describe(kappa) + " outside the " +
                          std::string(to_string(family_)) + " mean closure");
  }
  switch (family_) {
    case Family::Gaussian: return 0.5 * kappa * kappa;
    case Family::Bernoulli: return xlogx(kappa) + xlogx(1.0 - kappa);
    case Family::Poisson: return xlogx(kappa) - kappa;
    case Family::Exponential:
      if (kappa == 0.0) return kInf;
      return -1.0 - std::log(kappa);
  }
  return 0.0;
}

double ExpFamilyModel::variance(double theta) const {
  require_domain(theta);
  switch (family_) {
    case Family::Gaussian: return 1.0;
    case Family::Bernoulli: {
      const double p = logistic(theta);
      return p * (1.0 - p);
    }
    case Family::Poisson: return std::exp(theta);
    case Family::Exponential: return 1.0 / (theta * theta);
  }
  return 0.0;
}

double ExpFamilyModel::kl(double theta, double theta_prime) const {
  require_domain(theta);
  require_domain(theta_prime);
  if (theta == theta_prime) return 0.0;
  double value = 0.0;
  switch (family_) {
    case Family::Gaussian: {
      const double d = theta - theta_prime;
      value = 0.5 * d * d;
      break;
    }
    case Family::Bernoulli: {
      // d(p || p') written through log-probabilities for stability.
      const double p = logistic(theta);
      const double log_p = -softplus(-theta);
      const double log_1mp = -softplus(theta);
      const double log_q = -softplus(-theta_prime);
      const double log_1mq = -softplus(theta_prime);
      value = p * (log_p - log_q) + (1.0 - p) * (log_1mp - log_1mq);
      break;
    }
    case Family::Poisson: {
      const double d = theta_prime - theta;
      // e^{theta'} - e^{theta} - e^{theta} (theta' - theta) = e^theta (e^d - 1 - d)
      value = std::exp(theta) * (std::expm1(d) - d);
      break;
    }
    case Family::Exponential: {
      const double r = theta_prime / theta;
      value = r - 1.0 - std::log(r);
      break;
    }
  }
  return value < 0.0 ? 0.0 : value;
}

double ExpFamilyModel::kl_from_mean(double kappa, double theta_prime) const {
  require_domain(theta_prime);
  // D = A(theta') - kappa theta' + b(kappa)
  const double value = log_partition(theta_prime) - kappa * theta_prime + conjugate(kappa);
  return value < 0.0 ? 0.0 : value;
}

double ExpFamilyModel::suff_stat(double y) const {
  if (!std::isfinite(y)) throw DomainError("observation must be finite");
  switch (family_) {
    case Family::Gaussian: return y / sigma_;
    case Family::Bernoulli:
      if (y != 0.0 && y != 1.0) throw DomainError("bernoulli observation must be 0 or 1, got " + describe(y));
      return y;
    case Family::Poisson:
      if (y < 0.0 || y != std::floor(y)) {
        throw DomainError("poisson observation must be a non-negative integer, got " + describe(y));
      }
      return y;
    case Family::Exponential:
      if (y < 0.0) throw DomainError("exponential observation must be non-negative, got " + describe(y));
      return y;
  }
  return y;
}

double ExpFamilyModel::sample(double theta, Rng& rng) const {
  require_domain(theta);
  switch (family_) {
    case Family::Gaussian: {
      std::normal_distribution<double> normal(sigma_ * theta, sigma_);
      return normal(rng);
    }
    case Family::Bernoulli: {
      std::bernoulli_distribution coin(logistic(theta));
      return coin(rng) ? 1.0 : 0.0;
    }
    case Family::Poisson: {
      std::poisson_distribution<std::int64_t> counts(std::exp(theta));
      return static_cast<double>(counts(rng));
    }
    case Family::Exponential: {
      std::exponential_distribution<double> waiting(-theta);
      return waiting(rng);
    }
  }
  return 0.0;
}

bool ExpFamilyModel::same_log_partition(const ExpFamilyModel& other) const {
  // Gaussian A does not depend on sigma in this parametrization.
  return family_ == other.family_;
}

double clamp_empirical_mean(const ExpFamilyModel& model, double mean, double count) {
  const Interval image = model.mean_image();
  const double offset = 1.0 / (2.0 * count);
  if (mean <= image.lo) return image.lo + offset;
  if (mean >= image.hi) return image.hi - offset;
  return mean;
}

}  // namespace ctsense
