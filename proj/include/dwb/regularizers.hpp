#pragma once

#include "dwb/ot_core.hpp"

namespace dwb {

struct RegularizerWeights {
  double lambdaX = 0.0;
  double lambdaQ = 0.0;

  /// Throws when either weight is negative or non-finite.
  void validate() const;
};

/// Squared Bhattacharyya-arccos distance arccos(sum_k sqrt(a_k b_k))^2.
double simplexDistanceSquared(const SimplexWeight& a, const SimplexWeight& b);

/// Same distance on raw columns; no simplex validation.
double simplexDistanceSquared(const Eigen::Ref<const Vector>& a,
                              const Eigen::Ref<const Vector>& b);

/// Sum of squared distances between adjacent columns of X (K x N).
double latentPathPenalty(const Matrix& latent);

/// Gradient of latentPathPenalty. Entries below `floor` are evaluated at the
/// floor so the square-root derivative stays bounded.
Matrix latentPathPenaltyGradient(const Matrix& latent, double floor = 1e-8);

/// (1/n) * ||Q (I - 11^T / K)||_F^2: squared W2 from each pure state to the
/// barycenter at the simplex centroid, summed over states. Carries no N
/// factor; the objective applies it.
double pureStateSpreadPenalty(const Matrix& pureStates);

/// (2/n) * Q (I - 11^T / K).
Matrix pureStateSpreadPenaltyGradient(const Matrix& pureStates);

namespace detail {
/// d/dz arccos(z)^2 expressed as -2 * g(z) with g(z) = arccos(z)/sqrt(1-z^2).
/// Near z = 1 the series 1 + (1-z)/3 replaces the 0/0 form.
double arccosRatio(double z);
}  // namespace detail

}  // namespace dwb
