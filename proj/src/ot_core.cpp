#include "dwb/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dwb/error.hpp"

namespace dwb {

QuantileVector::QuantileVector(Vector values) : values_(std::move(values)) {
  if (values_.size() == 0) throw dataError("empty window");
  for (Index j = 0; j < values_.size(); ++j) {
    if (!std::isfinite(values_[j]))
      throw dataError("quantile vector has a non-finite entry");
    if (j > 0 && values_[j] < values_[j - 1])
      throw dataError("quantile vector is not sorted at index " +
                      std::to_string(j));
  }
}

SimplexWeight::SimplexWeight(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2)
    throw dataError("simplex weight needs at least two coordinates");
  double sum = 0.0;
  for (Index k = 0; k < weights_.size(); ++k) {
    if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k]))
      throw dataError("simplex weight has a negative or non-finite entry");
    sum += weights_[k];
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw dataError("simplex weight does not sum to one");
}

SimplexWeight SimplexWeight::vertex(Index size, Index k) {
  Vector w = Vector::Zero(size);
  w[k] = 1.0;
  return SimplexWeight(std::move(w));
}

SimplexWeight SimplexWeight::centroid(Index size) {
  return SimplexWeight(
      Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

double normalCdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normalQuantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  double x;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - kLow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley step on cdf(x) - p. Use the upper tail form for p > 0.5 so the
  // residual keeps its relative precision.
  double e;
  if (p <= 0.5) {
    e = normalCdf(x) - p;
  } else {
    e = (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  }
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

AnalyticDistribution AnalyticDistribution::gaussian(double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
    throw dataError("gaussian needs finite mean and sd > 0");
  AnalyticDistribution d;
  d.kind_ = Kind::Gaussian;
  d.gaussian_ = {mean, sd};
  return d;
}

AnalyticDistribution AnalyticDistribution::gaussianFromVariance(
    double mean, double variance) {
  if (!(variance > 0.0)) throw dataError("gaussian needs variance > 0");
  return gaussian(mean, std::sqrt(variance));
}

AnalyticDistribution AnalyticDistribution::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw dataError("uniform needs finite a < b");
  AnalyticDistribution d;
  d.kind_ = Kind::Uniform;
  d.uniform_ = {lo, hi};
  return d;
}

AnalyticDistribution AnalyticDistribution::pointMass(double at) {
  if (!std::isfinite(at)) throw dataError("point mass location must be finite");
  AnalyticDistribution d;
  d.kind_ = Kind::PointMass;
  d.point_ = {at};
  return d;
}

AnalyticDistribution AnalyticDistribution::mixture(
    std::vector<std::pair<double, AnalyticDistribution>> components) {
  if (components.empty()) throw dataError("mixture needs components");
  double sum = 0.0;
  auto mix = std::make_shared<Mixture>();
  for (auto& [w, dist] : components) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw dataError("mixture weight must be nonnegative");
    if (dist.depth() >= 2) throw dataError("mixture nesting deeper than two");
    sum += w;
    mix->push_back({w, std::move(dist)});
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw dataError("mixture weights do not sum to one");
  AnalyticDistribution d;
  d.kind_ = Kind::Mixture;
  d.mixture_ = std::move(mix);
  return d;
}

int AnalyticDistribution::depth() const noexcept {
  if (kind_ != Kind::Mixture) return 0;
  int deepest = 0;
  for (const auto& c : *mixture_) deepest = std::max(deepest, c.dist.depth());
  return deepest + 1;
}

double AnalyticDistribution::cdf(double x) const {
  switch (kind_) {
    case Kind::Gaussian:
      return normalCdf((x - gaussian_.mean) / gaussian_.sd);
    case Kind::Uniform:
      if (x <= uniform_.lo) return 0.0;
      if (x >= uniform_.hi) return 1.0;
      return (x - uniform_.lo) / (uniform_.hi - uniform_.lo);
    case Kind::PointMass:
      return x >= point_.at ? 1.0 : 0.0;
    case Kind::Mixture: {
      double total = 0.0;
      for (const auto& c : *mixture_) total += c.weight * c.dist.cdf(x);
      return total;
    }
  }
  return 0.0;
}

double AnalyticDistribution::mean() const {
  switch (kind_) {
    case Kind::Gaussian:
      return gaussian_.mean;
    case Kind::Uniform:
      return 0.5 * (uniform_.lo + uniform_.hi);
    case Kind::PointMass:
      return point_.at;
    case Kind::Mixture: {
      double m = 0.0;
      for (const auto& c : *mixture_) m += c.weight * c.dist.mean();
      return m;
    }
  }
  return 0.0;
}

double AnalyticDistribution::variance() const {
  switch (kind_) {
    case Kind::Gaussian:
      return gaussian_.sd * gaussian_.sd;
    case Kind::Uniform: {
      const double w = uniform_.hi - uniform_.lo;
      return w * w / 12.0;
    }
    case Kind::PointMass:
      return 0.0;
    case Kind::Mixture: {
      const double m = mean();
      double second = 0.0;
      for (const auto& c : *mixture_) {
        const double cm = c.dist.mean();
        second += c.weight * (c.dist.variance() + cm * cm);
      }
      return std::max(0.0, second - m * m);
    }
  }
  return 0.0;
}

std::pair<double, double> AnalyticDistribution::bracketHint() const {
  return {mean(), std::max(std::sqrt(variance()), 1e-6)};
}

double AnalyticDistribution::quantile(double xi) const {
  switch (kind_) {
    case Kind::Gaussian:
      return gaussian_.mean + gaussian_.sd * normalQuantile(xi);
    case Kind::Uniform:
      return uniform_.lo + xi * (uniform_.hi - uniform_.lo);
    case Kind::PointMass:
      return point_.at;
    case Kind::Mixture:
      break;
  }

  constexpr double kProbTol = 1e-10;
  const auto [center, scale] = bracketHint();
  double lo = center - scale;
  double hi = center + scale;
  for (double width = scale; cdf(lo) >= xi && std::isfinite(lo); width *= 2.0)
    lo = center - 2.0 * width;
  for (double width = scale; cdf(hi) < xi && std::isfinite(hi); width *= 2.0)
    hi = center + 2.0 * width;

  // Invariant: cdf(lo) < xi <= cdf(hi).
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = cdf(mid);
    if (std::abs(f - xi) <= kProbTol) return mid;
    if (f >= xi) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

QuantileVector empiricalQuantileVector(std::span<const double> samples) {
  if (samples.empty()) throw dataError("empty window");
  Vector v(static_cast<Index>(samples.size()));
  std::copy(samples.begin(), samples.end(), v.data());
  std::stable_sort(v.data(), v.data() + v.size());
  return QuantileVector(std::move(v));
}

QuantileVector quantileVectorOf(const AnalyticDistribution& dist, Index n) {
  if (n < 1) throw dataError("discretization must be positive");
  Vector v(n);
  for (Index j = 0; j < n; ++j) v[j] = dist.quantile(quantileLevel(j, n));
  // Bisection noise on near-degenerate components can break exact ordering
  // by a few ulps.
  for (Index j = 1; j < n; ++j) v[j] = std::max(v[j], v[j - 1]);
  return QuantileVector(std::move(v));
}

double wasserstein2Squared(const QuantileVector& a, const QuantileVector& b) {
  if (a.size() != b.size()) throw dataError("incompatible discretization");
  return (a.values() - b.values()).squaredNorm() /
         static_cast<double>(a.size());
}

double stepWasserstein2Squared(const Vector& a, const Vector& b) {
  const Index n = a.size();
  const Index m = b.size();
  if (n == 0 || m == 0) throw dataError("empty window");
  // Breakpoints i/n and j/m expressed exactly in units of 1/(n*m).
  const double unit = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  Index i = 0;
  Index j = 0;
  long long pos = 0;
  double total = 0.0;
  while (i < n && j < m) {
    const long long endA = static_cast<long long>(i + 1) * m;
    const long long endB = static_cast<long long>(j + 1) * n;
    const long long end = std::min(endA, endB);
    const double diff = a[i] - b[j];
    total += static_cast<double>(end - pos) * diff * diff;
    pos = end;
    if (endA == end) ++i;
    if (endB == end) ++j;
  }
  return total * unit;
}

QuantileVector barycenterDQV(const SimplexWeight& x, const Matrix& pureStates) {
  if (x.size() != pureStates.cols())
    throw dataError("barycenter weight size does not match pure states");
  return QuantileVector(pureStates * x.weights());
}

double barycenterQuantile(const SimplexWeight& x,
                          std::span<const AnalyticDistribution> pureStates,
                          double xi) {
  if (static_cast<Index>(pureStates.size()) != x.size())
    throw dataError("barycenter weight size does not match pure states");
  double value = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) continue;
    value += x[k] * pureStates[static_cast<std::size_t>(k)].quantile(xi);
  }
  return value;
}

double sampleFromBarycenter(const SimplexWeight& x,
                            std::span<const AnalyticDistribution> pureStates,
                            Rng& rng) {
  return barycenterQuantile(x, pureStates, uniformOpen(rng));
}

double windowApproximationError(const QuantileVector& window,
                                const QuantileVector& truth) {
  return wasserstein2Squared(window, truth);
}

}  // namespace dwb
