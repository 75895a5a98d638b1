#pragma once

// Block-coordinate descent for the windowed barycenter least-squares problem
//
//   F(Q, X) = (1/n) ||Y - Q X||_F^2 + lambdaX * R_x(X) + lambdaQ * N * R_q(Q)
//
// with every column of Q nondecreasing and every column of X on the simplex.
// Each block is minimized by projected gradient with Armijo backtracking;
// trial steps come from the Barzilai-Borwein rule.

#include <vector>

#include "dwb/ot_core.hpp"
#include "dwb/regularizers.hpp"

namespace dwb {

struct SolverConfig {
  /// Outer stopping threshold on the objective decrease. When etaRelative is
  /// set the threshold is eta * F(initial iterate).
  double eta = 1e-6;
  bool etaRelative = true;
  int maxOuterIters = 200;
  int maxInnerIters = 100;
  /// Floor for latent coordinates; X lives on {x >= epsSimplex, sum x = 1}.
  double epsSimplex = 1e-8;
  /// Minimum gap between consecutive quantiles of a pure state.
  double epsMono = 0.0;
  double lineSearchShrink = 0.5;
  double armijoC = 1e-4;
  /// Inner loops stop once the relative objective decrease drops below this.
  double innerTol = 1e-12;

  void validate() const;
};

struct ObjectiveTerms {
  double dataFit = 0.0;
  double rxTerm = 0.0;  // R_x(X)
  double rqTerm = 0.0;  // R_q(Q), without the N factor
  double total = 0.0;   // dataFit + lambdaX * rxTerm + lambdaQ * N * rqTerm
};

struct ObjectiveState {
  Matrix pureStates;  // Q, n x K
  Matrix latent;      // X, K x N
  ObjectiveTerms terms;
};

ObjectiveTerms evaluateObjective(const Matrix& windows, const Matrix& pureStates,
                                 const Matrix& latent,
                                 const RegularizerWeights& weights);

/// -(2/n) Q^T (Y - Q X)
Matrix dataFitGradientLatent(const Matrix& windows, const Matrix& pureStates,
                             const Matrix& latent);
/// -(2/n) (Y - Q X) X^T
Matrix dataFitGradientPureStates(const Matrix& windows,
                                 const Matrix& pureStates,
                                 const Matrix& latent);

/// Euclidean projection onto {x : x >= eps, sum x = 1}.
SimplexWeight projectSimplex(const Vector& v, double eps);

/// Euclidean projection onto {q : q[j+1] - q[j] >= epsMono} by
/// pool-adjacent-violators on the gap-shifted vector.
QuantileVector projectMonotone(const Vector& v, double epsMono);

/// Minimize F over X with Q fixed. Returns a feasible X with F not larger
/// than at the input.
Matrix solveXStep(const Matrix& pureStates, const Matrix& latent,
                  const Matrix& windows, const RegularizerWeights& weights,
                  const SolverConfig& cfg);

/// Minimize F over Q with X fixed.
Matrix solveQStep(const Matrix& pureStates, const Matrix& latent,
                  const Matrix& windows, const RegularizerWeights& weights,
                  const SolverConfig& cfg);

/// Gaussian pure states: column k is mean[k] + sd[k] * z where z holds the
/// standard normal quantiles of the n-point grid.
struct GaussianStates {
  Vector mean;
  Vector sd;

  static constexpr double kMinSd = 1e-8;

  Matrix materialize(const Vector& standardQuantiles) const;
};

/// Standard normal n-point quantile vector.
Vector standardNormalGrid(Index n);

/// Minimize F over (mean, sd) with X fixed; sd is kept >= kMinSd.
GaussianStates solveGaussianStep(const GaussianStates& states,
                                 const Matrix& latent, const Matrix& windows,
                                 const RegularizerWeights& weights,
                                 const SolverConfig& cfg);

struct DescentResult {
  Matrix pureStates;
  Matrix latent;
  GaussianStates gaussian;  // filled for the Gaussian variant only
  std::vector<ObjectiveTerms> trace;  // initial iterate first
  int outerIterations = 0;
  bool converged = false;  // stopped by the eta rule rather than the cap
};

DescentResult coordinateDescent(const Matrix& windows, const Matrix& initStates,
                                const Matrix& initLatent,
                                const RegularizerWeights& weights,
                                const SolverConfig& cfg);

DescentResult coordinateDescentGaussian(const Matrix& windows,
                                        const GaussianStates& initStates,
                                        const Matrix& initLatent,
                                        const RegularizerWeights& weights,
                                        const SolverConfig& cfg);

}  // namespace dwb
