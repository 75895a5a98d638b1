#pragma once

// One-dimensional optimal transport on quantile functions.
//
// A distribution is represented by its n-point discrete quantile vector: the
// quantiles at levels (j + 0.5) / n, j = 0..n-1. Two such vectors on the same
// grid induce step functions with shared breakpoints, so their squared
// Wasserstein-2 distance is exactly (1/n) * ||a - b||^2.

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dwb/rng.hpp"

namespace dwb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Level of the j-th (0-based) sample of an n-point quantile grid.
inline double quantileLevel(Index j, Index n) {
  return (static_cast<double>(j) + 0.5) / static_cast<double>(n);
}

/// Ascending, finite, nonempty vector of quantiles.
class QuantileVector {
 public:
  /// Throws dwb::Error (data) when the invariant does not hold.
  explicit QuantileVector(Vector values);

  const Vector& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  double operator[](Index j) const { return values_[j]; }

 private:
  Vector values_;
};

/// Nonnegative weights summing to one, K >= 2.
class SimplexWeight {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit SimplexWeight(Vector weights);

  static SimplexWeight vertex(Index size, Index k);
  static SimplexWeight centroid(Index size);

  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return weights_.size(); }
  double operator[](Index k) const { return weights_[k]; }

 private:
  Vector weights_;
};

/// Standard normal CDF.
double normalCdf(double z);

/// Inverse standard normal CDF for p in (0, 1). Acklam's rational
/// approximation followed by one Halley correction step.
double normalQuantile(double p);

/// Closed-form or numerically inverted univariate distribution.
///
/// Gaussians are parameterized by standard deviation; use
/// gaussianFromVariance for the N(mean, variance) convention.
class AnalyticDistribution {
 public:
  struct Gaussian {
    double mean;
    double sd;
  };
  struct Uniform {
    double lo;
    double hi;
  };
  struct PointMass {
    double at;
  };
  struct Component;
  using Mixture = std::vector<Component>;

  static AnalyticDistribution gaussian(double mean, double sd);
  static AnalyticDistribution gaussianFromVariance(double mean,
                                                   double variance);
  static AnalyticDistribution uniform(double lo, double hi);
  static AnalyticDistribution pointMass(double at);
  /// Weights must lie on the simplex; nesting depth is limited to two.
  static AnalyticDistribution mixture(
      std::vector<std::pair<double, AnalyticDistribution>> components);

  double cdf(double x) const;
  /// Generalized inverse inf{x : cdf(x) >= xi}. Mixtures are inverted by
  /// bisection to 1e-10 in probability.
  double quantile(double xi) const;
  double mean() const;
  double variance() const;

  bool isMixture() const noexcept { return kind_ == Kind::Mixture; }
  int depth() const noexcept;

  /// Access for serialization.
  enum class Kind { Gaussian, Uniform, PointMass, Mixture };
  Kind kind() const noexcept { return kind_; }
  const Gaussian& asGaussian() const { return gaussian_; }
  const Uniform& asUniform() const { return uniform_; }
  const PointMass& asPointMass() const { return point_; }
  const Mixture& asMixture() const { return *mixture_; }

 private:
  AnalyticDistribution() = default;

  // bracket center and scale for quantile bisection
  std::pair<double, double> bracketHint() const;

  Kind kind_ = Kind::PointMass;
  Gaussian gaussian_{0.0, 1.0};
  Uniform uniform_{0.0, 1.0};
  PointMass point_{0.0};
  std::shared_ptr<const Mixture> mixture_;
};

struct AnalyticDistribution::Component {
  double weight;
  AnalyticDistribution dist;
};

/// Sorted windows of a series. Column i of `sorted` is the ascending sort of
/// samples starts[i] .. starts[i] + windowSize - 1 (0-based indices).
struct WindowedSeries {
  Matrix sorted;
  std::vector<Index> starts;
  Index stride = 1;
  Index windowSize = 1;

  Index count() const noexcept { return sorted.cols(); }
  /// Center of window i in 0-based sample coordinates.
  double center(Index i) const {
    return static_cast<double>(starts[static_cast<std::size_t>(i)]) +
           0.5 * static_cast<double>(windowSize - 1);
  }
};

/// Ascending sort of the samples; ties are kept.
QuantileVector empiricalQuantileVector(std::span<const double> samples);

/// n-point discrete quantile vector of an analytic distribution.
QuantileVector quantileVectorOf(const AnalyticDistribution& dist, Index n);

/// (1/n) * ||a - b||^2; throws on length mismatch.
double wasserstein2Squared(const QuantileVector& a, const QuantileVector& b);

/// Exact squared W2 between the step-function quantile approximations of two
/// vectors on possibly different grids, integrated over the merged
/// breakpoint partition. Equals wasserstein2Squared when the sizes agree.
double stepWasserstein2Squared(const Vector& a, const Vector& b);

/// Weighted column combination sum_k x[k] * Q[:, k].
QuantileVector barycenterDQV(const SimplexWeight& x, const Matrix& pureStates);

/// Quantile of the barycenter of analytic pure states at level xi.
double barycenterQuantile(const SimplexWeight& x,
                          std::span<const AnalyticDistribution> pureStates,
                          double xi);

/// One draw from the barycenter by inverse-transform sampling.
double sampleFromBarycenter(const SimplexWeight& x,
                            std::span<const AnalyticDistribution> pureStates,
                            Rng& rng);

/// Squared W2 between a sample window's empirical law and the truth's
/// quantile vector at the same discretization.
double windowApproximationError(const QuantileVector& window,
                                const QuantileVector& truth);

}  // namespace dwb
