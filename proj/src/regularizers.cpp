#include "dwb/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include "dwb/error.hpp"

namespace dwb {

void RegularizerWeights::validate() const {
  if (!(lambdaX >= 0.0) || !std::isfinite(lambdaX) || !(lambdaQ >= 0.0) ||
      !std::isfinite(lambdaQ))
    throw dataError("regularization weights must be finite and nonnegative");
}

namespace detail {

double arccosRatio(double z) {
  const double u = 1.0 - std::clamp(z, 0.0, 1.0);
  if (u < 1e-6) return 1.0 + u / 3.0 + 2.0 * u * u / 15.0;
  const double zc = 1.0 - u;
  return std::acos(zc) / std::sqrt(1.0 - zc * zc);
}

}  // namespace detail

namespace {

double affinity(const Eigen::Ref<const Vector>& a,
                const Eigen::Ref<const Vector>& b) {
  double z = 0.0;
  for (Index k = 0; k < a.size(); ++k)
    z += std::sqrt(std::max(a[k], 0.0) * std::max(b[k], 0.0));
  return std::clamp(z, 0.0, 1.0);
}

}  // namespace

double simplexDistanceSquared(const Eigen::Ref<const Vector>& a,
                              const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size())
    throw dataError("simplex weights differ in dimension");
  const double d = std::acos(affinity(a, b));
  return d * d;
}

double simplexDistanceSquared(const SimplexWeight& a, const SimplexWeight& b) {
  return simplexDistanceSquared(a.weights(), b.weights());
}

double latentPathPenalty(const Matrix& latent) {
  double total = 0.0;
  for (Index i = 0; i + 1 < latent.cols(); ++i)
    total += simplexDistanceSquared(latent.col(i), latent.col(i + 1));
  return total;
}

Matrix latentPathPenaltyGradient(const Matrix& latent, double floor) {
  const Index K = latent.rows();
  const Index N = latent.cols();
  const Matrix x = latent.cwiseMax(floor);
  Matrix grad = Matrix::Zero(K, N);
  for (Index i = 0; i + 1 < N; ++i) {
    double z = 0.0;
    for (Index k = 0; k < K; ++k) z += std::sqrt(x(k, i) * x(k, i + 1));
    const double g = detail::arccosRatio(z);
    for (Index k = 0; k < K; ++k) {
      const double ratio = std::sqrt(x(k, i + 1) / x(k, i));
      grad(k, i) -= g * ratio;
      grad(k, i + 1) -= g / ratio;
    }
  }
  return grad;
}

double pureStateSpreadPenalty(const Matrix& pureStates) {
  const Vector centroid = pureStates.rowwise().mean();
  return (pureStates.colwise() - centroid).squaredNorm() /
         static_cast<double>(pureStates.rows());
}

Matrix pureStateSpreadPenaltyGradient(const Matrix& pureStates) {
  const Vector centroid = pureStates.rowwise().mean();
  return (2.0 / static_cast<double>(pureStates.rows())) *
         (pureStates.colwise() - centroid);
}

}  // namespace dwb
