#include "dwb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dwb/error.hpp"

namespace dwb {

void SolverConfig::validate() const {
  if (!(eta > 0.0)) throw dataError("solver eta must be positive");
  if (maxOuterIters < 1 || maxInnerIters < 1)
    throw dataError("solver iteration caps must be positive");
  if (!(epsSimplex >= 0.0)) throw dataError("epsSimplex must be nonnegative");
  if (!(epsMono >= 0.0)) throw dataError("epsMono must be nonnegative");
  if (!(lineSearchShrink > 0.0 && lineSearchShrink < 1.0))
    throw dataError("lineSearchShrink must lie in (0, 1)");
  if (!(armijoC > 0.0 && armijoC < 1.0))
    throw dataError("armijoC must lie in (0, 1)");
  if (!(innerTol >= 0.0)) throw dataError("innerTol must be nonnegative");
}

ObjectiveTerms evaluateObjective(const Matrix& windows, const Matrix& pureStates,
                                 const Matrix& latent,
                                 const RegularizerWeights& weights) {
  const double n = static_cast<double>(windows.rows());
  const double N = static_cast<double>(windows.cols());
  ObjectiveTerms t;
  t.dataFit = (windows - pureStates * latent).squaredNorm() / n;
  t.rxTerm = weights.lambdaX > 0.0 ? latentPathPenalty(latent) : 0.0;
  t.rqTerm = pureStateSpreadPenalty(pureStates);
  t.total = t.dataFit + weights.lambdaX * t.rxTerm +
            weights.lambdaQ * N * t.rqTerm;
  return t;
}

Matrix dataFitGradientLatent(const Matrix& windows, const Matrix& pureStates,
                             const Matrix& latent) {
  const double n = static_cast<double>(windows.rows());
  return (-2.0 / n) * pureStates.transpose() * (windows - pureStates * latent);
}

Matrix dataFitGradientPureStates(const Matrix& windows,
                                 const Matrix& pureStates,
                                 const Matrix& latent) {
  const double n = static_cast<double>(windows.rows());
  return (-2.0 / n) * (windows - pureStates * latent) * latent.transpose();
}

namespace {

void projectSimplexInPlace(Eigen::Ref<Vector> v, double eps) {
  const Index K = v.size();
  bool feasible = true;
  double sum = 0.0;
  for (Index k = 0; k < K; ++k) {
    feasible = feasible && v[k] >= eps;
    sum += v[k];
  }
  if (feasible && std::abs(sum - 1.0) <= 1e-15) return;

  // Shift to {y >= 0, sum y = radius} and apply sort-and-threshold.
  const double radius = 1.0 - static_cast<double>(K) * eps;
  std::vector<double> u(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) u[static_cast<std::size_t>(k)] = v[k] - eps;
  std::vector<double> sorted = u;
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  for (Index k = 0; k < K; ++k)
    v[k] = std::max(u[static_cast<std::size_t>(k)] - theta, 0.0) + eps;
}

void projectMonotoneInPlace(Eigen::Ref<Vector> v, double epsMono) {
  const Index n = v.size();
  bool feasible = true;
  for (Index j = 1; j < n && feasible; ++j)
    feasible = v[j] - v[j - 1] >= epsMono;
  if (feasible) return;

  // Pool adjacent violators on w[j] = v[j] - j * epsMono.
  std::vector<double> blockMean;
  std::vector<Index> blockSize;
  blockMean.reserve(static_cast<std::size_t>(n));
  blockSize.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    double mean = v[j] - static_cast<double>(j) * epsMono;
    Index size = 1;
    while (!blockMean.empty() && blockMean.back() >= mean) {
      const Index prev = blockSize.back();
      mean = (blockMean.back() * static_cast<double>(prev) +
              mean * static_cast<double>(size)) /
             static_cast<double>(prev + size);
      size += prev;
      blockMean.pop_back();
      blockSize.pop_back();
    }
    blockMean.push_back(mean);
    blockSize.push_back(size);
  }
  Index j = 0;
  for (std::size_t b = 0; b < blockMean.size(); ++b) {
    for (Index s = 0; s < blockSize[b]; ++s, ++j)
      v[j] = blockMean[b] + static_cast<double>(j) * epsMono;
  }
}

// Projected gradient with Armijo backtracking along the projection arc.
template <class Objective, class Gradient, class Project>
Matrix projectedGradient(Matrix z, const Objective& objective,
                         const Gradient& gradient, const Project& project,
                         const SolverConfig& cfg) {
  double fz = objective(z);
  if (!std::isfinite(fz)) throw numericalError("diverged");
  Matrix g = gradient(z);
  const double gmax = g.cwiseAbs().maxCoeff();
  if (!std::isfinite(gmax)) throw numericalError("diverged");
  double step = 1.0 / std::max(gmax, 1e-12);

  for (int it = 0; it < cfg.maxInnerIters; ++it) {
    double t = step;
    bool accepted = false;
    Matrix trial;
    double ftrial = fz;
    for (int ls = 0; ls < 80; ++ls) {
      trial = z - t * g;
      project(trial);
      const Matrix d = trial - z;
      const double slope = (g.array() * d.array()).sum();
      if (d.cwiseAbs().maxCoeff() == 0.0 || !(slope < 0.0)) return z;
      ftrial = objective(trial);
      if (std::isfinite(ftrial) && ftrial <= fz + cfg.armijoC * slope) {
        accepted = true;
        break;
      }
      t *= cfg.lineSearchShrink;
    }
    if (!accepted) break;

    Matrix gtrial = gradient(trial);
    const Matrix s = trial - z;
    const double sy = (s.array() * (gtrial - g).array()).sum();
    const double ss = s.squaredNorm();
    step = sy > 0.0 ? ss / sy : 10.0 * t;
    step = std::clamp(step, 1e-14, 1e14);

    const double decrease = fz - ftrial;
    z = std::move(trial);
    g = std::move(gtrial);
    fz = ftrial;
    if (decrease <= cfg.innerTol * std::max(std::abs(fz), 1e-300)) break;
  }
  return z;
}

}  // namespace

SimplexWeight projectSimplex(const Vector& v, double eps) {
  if (v.size() < 2) throw dataError("simplex projection needs K >= 2");
  if (!(eps >= 0.0) || eps * static_cast<double>(v.size()) >= 1.0)
    throw dataError("simplex floor too large for dimension");
  Vector out = v;
  projectSimplexInPlace(out, eps);
  return SimplexWeight(std::move(out));
}

QuantileVector projectMonotone(const Vector& v, double epsMono) {
  if (v.size() == 0) throw dataError("empty window");
  Vector out = v;
  projectMonotoneInPlace(out, epsMono);
  return QuantileVector(std::move(out));
}

Matrix solveXStep(const Matrix& pureStates, const Matrix& latent,
                  const Matrix& windows, const RegularizerWeights& weights,
                  const SolverConfig& cfg) {
  const double n = static_cast<double>(windows.rows());
  const double N = static_cast<double>(windows.cols());
  const double rq = weights.lambdaQ * N * pureStateSpreadPenalty(pureStates);
  const Matrix gram = pureStates.transpose() * pureStates;
  const Matrix cross = pureStates.transpose() * windows;

  auto objective = [&](const Matrix& x) {
    // Same summation order as evaluateObjective so traces compare exactly.
    double f = (windows - pureStates * x).squaredNorm() / n;
    if (weights.lambdaX > 0.0) f += weights.lambdaX * latentPathPenalty(x);
    return f + rq;
  };
  auto gradient = [&](const Matrix& x) {
    Matrix g = (2.0 / n) * (gram * x - cross);
    if (weights.lambdaX > 0.0)
      g += weights.lambdaX * latentPathPenaltyGradient(x, cfg.epsSimplex);
    return g;
  };
  auto project = [&](Matrix& x) {
    for (Index i = 0; i < x.cols(); ++i)
      projectSimplexInPlace(x.col(i), cfg.epsSimplex);
  };

  Matrix start = latent;
  project(start);
  return projectedGradient(std::move(start), objective, gradient, project, cfg);
}

Matrix solveQStep(const Matrix& pureStates, const Matrix& latent,
                  const Matrix& windows, const RegularizerWeights& weights,
                  const SolverConfig& cfg) {
  const double n = static_cast<double>(windows.rows());
  const double N = static_cast<double>(windows.cols());
  const double rx =
      weights.lambdaX > 0.0 ? weights.lambdaX * latentPathPenalty(latent) : 0.0;
  const Matrix xxt = latent * latent.transpose();
  const Matrix yxt = windows * latent.transpose();

  auto objective = [&](const Matrix& q) {
    return (windows - q * latent).squaredNorm() / n + rx +
           weights.lambdaQ * N * pureStateSpreadPenalty(q);
  };
  auto gradient = [&](const Matrix& q) {
    Matrix g = (2.0 / n) * (q * xxt - yxt);
    if (weights.lambdaQ > 0.0)
      g += weights.lambdaQ * N * pureStateSpreadPenaltyGradient(q);
    return g;
  };
  auto project = [&](Matrix& q) {
    for (Index k = 0; k < q.cols(); ++k)
      projectMonotoneInPlace(q.col(k), cfg.epsMono);
  };

  Matrix start = pureStates;
  project(start);
  return projectedGradient(std::move(start), objective, gradient, project, cfg);
}

Matrix GaussianStates::materialize(const Vector& standardQuantiles) const {
  Matrix q(standardQuantiles.size(), mean.size());
  for (Index k = 0; k < mean.size(); ++k)
    q.col(k) = (sd[k] * standardQuantiles).array() + mean[k];
  return q;
}

Vector standardNormalGrid(Index n) {
  Vector z(n);
  for (Index j = 0; j < n; ++j) z[j] = normalQuantile(quantileLevel(j, n));
  return z;
}

GaussianStates solveGaussianStep(const GaussianStates& states,
                                 const Matrix& latent, const Matrix& windows,
                                 const RegularizerWeights& weights,
                                 const SolverConfig& cfg) {
  const Index K = states.mean.size();
  const double n = static_cast<double>(windows.rows());
  const double N = static_cast<double>(windows.cols());
  const Vector z = standardNormalGrid(windows.rows());
  const double rx =
      weights.lambdaX > 0.0 ? weights.lambdaX * latentPathPenalty(latent) : 0.0;
  const Matrix xxt = latent * latent.transpose();
  const Matrix yxt = windows * latent.transpose();

  // Parameters packed as a 2 x K matrix: row 0 means, row 1 sds.
  auto unpack = [&](const Matrix& p) {
    GaussianStates s{p.row(0).transpose(), p.row(1).transpose()};
    return s.materialize(z);
  };
  auto objective = [&](const Matrix& p) {
    const Matrix q = unpack(p);
    return (windows - q * latent).squaredNorm() / n + rx +
           weights.lambdaQ * N * pureStateSpreadPenalty(q);
  };
  auto gradient = [&](const Matrix& p) {
    const Matrix q = unpack(p);
    Matrix gq = (2.0 / n) * (q * xxt - yxt);
    if (weights.lambdaQ > 0.0)
      gq += weights.lambdaQ * N * pureStateSpreadPenaltyGradient(q);
    Matrix g(2, K);
    g.row(0) = gq.colwise().sum();
    g.row(1) = z.transpose() * gq;
    return g;
  };
  auto project = [&](Matrix& p) {
    p.row(1) = p.row(1).cwiseMax(GaussianStates::kMinSd);
  };

  Matrix start(2, K);
  start.row(0) = states.mean.transpose();
  start.row(1) = states.sd.transpose();
  project(start);
  const Matrix p =
      projectedGradient(std::move(start), objective, gradient, project, cfg);
  return GaussianStates{p.row(0).transpose(), p.row(1).transpose()};
}

namespace {

void checkShapes(const Matrix& windows, Index statesRows, Index statesCols,
                 const Matrix& latent) {
  if (statesRows != windows.rows())
    throw dataError("pure states and windows differ in discretization");
  if (latent.rows() != statesCols || latent.cols() != windows.cols())
    throw dataError("latent path shape does not match pure states and windows");
}

}  // namespace

DescentResult coordinateDescent(const Matrix& windows, const Matrix& initStates,
                                const Matrix& initLatent,
                                const RegularizerWeights& weights,
                                const SolverConfig& cfg) {
  cfg.validate();
  weights.validate();
  checkShapes(windows, initStates.rows(), initStates.cols(), initLatent);

  DescentResult result;
  result.pureStates = initStates;
  result.latent = initLatent;
  for (Index k = 0; k < result.pureStates.cols(); ++k)
    projectMonotoneInPlace(result.pureStates.col(k), cfg.epsMono);
  for (Index i = 0; i < result.latent.cols(); ++i)
    projectSimplexInPlace(result.latent.col(i), cfg.epsSimplex);

  ObjectiveTerms current =
      evaluateObjective(windows, result.pureStates, result.latent, weights);
  if (!std::isfinite(current.total)) throw numericalError("diverged");
  result.trace.push_back(current);
  const double threshold =
      cfg.etaRelative ? cfg.eta * std::max(current.total, 1e-300) : cfg.eta;

  for (int it = 0; it < cfg.maxOuterIters; ++it) {
    Matrix latent =
        solveXStep(result.pureStates, result.latent, windows, weights, cfg);
    Matrix states = solveQStep(result.pureStates, latent, windows, weights, cfg);
    const ObjectiveTerms next = evaluateObjective(windows, states, latent, weights);
    if (!std::isfinite(next.total)) throw numericalError("diverged");
    result.outerIterations = it + 1;
    // Re-projection of an already feasible iterate can cost a few ulps; keep
    // the previous iterate rather than record an increase.
    if (next.total > current.total) {
      result.converged = true;
      break;
    }
    result.latent = std::move(latent);
    result.pureStates = std::move(states);
    result.trace.push_back(next);
    const double decrease = current.total - next.total;
    current = next;
    if (decrease <= threshold) {
      result.converged = true;
      break;
    }
  }
  return result;
}

DescentResult coordinateDescentGaussian(const Matrix& windows,
                                        const GaussianStates& initStates,
                                        const Matrix& initLatent,
                                        const RegularizerWeights& weights,
                                        const SolverConfig& cfg) {
  cfg.validate();
  weights.validate();
  if (initStates.mean.size() != initStates.sd.size())
    throw dataError("gaussian means and sds differ in length");
  checkShapes(windows, windows.rows(), initStates.mean.size(), initLatent);

  const Vector z = standardNormalGrid(windows.rows());
  DescentResult result;
  result.gaussian = initStates;
  result.gaussian.sd = result.gaussian.sd.cwiseMax(GaussianStates::kMinSd);
  result.latent = initLatent;
  for (Index i = 0; i < result.latent.cols(); ++i)
    projectSimplexInPlace(result.latent.col(i), cfg.epsSimplex);
  result.pureStates = result.gaussian.materialize(z);

  ObjectiveTerms current =
      evaluateObjective(windows, result.pureStates, result.latent, weights);
  if (!std::isfinite(current.total)) throw numericalError("diverged");
  result.trace.push_back(current);
  const double threshold =
      cfg.etaRelative ? cfg.eta * std::max(current.total, 1e-300) : cfg.eta;

  for (int it = 0; it < cfg.maxOuterIters; ++it) {
    Matrix latent =
        solveXStep(result.pureStates, result.latent, windows, weights, cfg);
    GaussianStates gaussian =
        solveGaussianStep(result.gaussian, latent, windows, weights, cfg);
    Matrix states = gaussian.materialize(z);
    const ObjectiveTerms next = evaluateObjective(windows, states, latent, weights);
    if (!std::isfinite(next.total)) throw numericalError("diverged");
    result.outerIterations = it + 1;
    if (next.total > current.total) {
      result.converged = true;
      break;
    }
    result.latent = std::move(latent);
    result.gaussian = std::move(gaussian);
    result.pureStates = std::move(states);
    result.trace.push_back(next);
    const double decrease = current.total - next.total;
    current = next;
    if (decrease <= threshold) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace dwb
