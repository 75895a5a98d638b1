#include "dwb/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "dwb/error.hpp"
#include "dwb/rng.hpp"

namespace dwb {

namespace {

constexpr int kMaxBruteForceStates = 8;

void checkPermutation(const Permutation& perm, Index K) {
  if (static_cast<Index>(perm.size()) != K)
    throw dataError("permutation size does not match the state count");
}

}  // namespace

double pureStateError(const Matrix& truthStates, const Matrix& learnedStates,
                      const Permutation& perm) {
  const Index K = truthStates.cols();
  if (learnedStates.cols() != K)
    throw dataError("truth and learned state counts differ");
  checkPermutation(perm, K);
  double total = 0.0;
  for (Index k = 0; k < K; ++k)
    total += stepWasserstein2Squared(truthStates.col(k),
                                     learnedStates.col(perm[static_cast<std::size_t>(k)]));
  return total / static_cast<double>(K);
}

double latentError(const Matrix& truthLatent, const Matrix& learnedLatent,
                   const Permutation& perm) {
  const Index K = truthLatent.rows();
  if (learnedLatent.rows() != K || learnedLatent.cols() != truthLatent.cols())
    throw dataError("truth and learned latent paths differ in shape");
  checkPermutation(perm, K);
  double total = 0.0;
  for (Index k = 0; k < K; ++k)
    total += (truthLatent.row(k) -
              learnedLatent.row(perm[static_cast<std::size_t>(k)]))
                 .squaredNorm();
  return total / static_cast<double>(truthLatent.cols());
}

Permutation matchStates(const Matrix& truthStates, const Matrix& learnedStates,
                        const Matrix& truthLatent, const Matrix& learnedLatent) {
  const auto K = static_cast<int>(truthStates.cols());
  if (K > kMaxBruteForceStates) throw dataError("use assignment solver");

  // Pairwise costs separate over states, so precompute them once.
  Matrix stateCost(K, K);
  Matrix latentCost(K, K);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) {
      stateCost(a, b) =
          stepWasserstein2Squared(truthStates.col(a), learnedStates.col(b));
      latentCost(a, b) = (truthLatent.row(a) - learnedLatent.row(b)).squaredNorm();
    }
  }
  const double nq = static_cast<double>(K);
  const double nx = static_cast<double>(truthLatent.cols());

  Permutation perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  Permutation best = perm;
  double bestCost = std::numeric_limits<double>::infinity();
  do {
    double eq = 0.0;
    double ex = 0.0;
    for (int k = 0; k < K; ++k) {
      eq += stateCost(k, perm[static_cast<std::size_t>(k)]);
      ex += latentCost(k, perm[static_cast<std::size_t>(k)]);
    }
    const double cost = eq / nq + ex / nx;
    if (cost < bestCost) {
      bestCost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

GroundTruthErrors groundTruthErrors(const Matrix& truthStates,
                                    const Matrix& learnedStates,
                                    const Matrix& truthLatent,
                                    const Matrix& learnedLatent) {
  GroundTruthErrors out;
  out.permutation =
      matchStates(truthStates, learnedStates, truthLatent, learnedLatent);
  out.eQ = pureStateError(truthStates, learnedStates, out.permutation);
  out.eX = latentError(truthLatent, learnedLatent, out.permutation);
  return out;
}

Matrix truthLatentAt(const GroundTruthSpec& truth,
                     const std::vector<Index>& windowStarts, Index windowSize) {
  const Index K = static_cast<Index>(truth.pureStates.size());
  Matrix x(K, static_cast<Index>(windowStarts.size()));
  for (std::size_t i = 0; i < windowStarts.size(); ++i) {
    const double center = static_cast<double>(windowStarts[i]) +
                          0.5 * static_cast<double>(windowSize - 1);
    x.col(static_cast<Index>(i)) = truth.latentAtSample(center);
  }
  return x;
}

GroundTruthErrors groundTruthErrors(const GroundTruthSpec& truth,
                                    const DwbModel& model, Index oracleGrid) {
  const Index K = static_cast<Index>(truth.pureStates.size());
  if (model.numStates() != K)
    throw dataError("model and truth state counts differ");
  Matrix truthStates(oracleGrid, K);
  for (Index k = 0; k < K; ++k)
    truthStates.col(k) =
        quantileVectorOf(truth.pureStates[static_cast<std::size_t>(k)],
                         oracleGrid)
            .values();
  const Matrix truthLatent =
      truthLatentAt(truth, model.windowStarts, model.windowSize());
  return groundTruthErrors(truthStates, model.pureStates, truthLatent,
                           model.latent);
}

DataFitReport dataFitError(const DwbModel& model, const WindowedSeries& windows,
                           Index mcSamples, std::uint64_t seed) {
  const Index n = model.windowSize();
  const Index N = model.windowCount();
  if (windows.windowSize != n || windows.count() != N)
    throw dataError("model and windows differ in shape");

  DataFitReport out;
  const ObjectiveTerms terms = evaluateObjective(
      windows.sorted, model.pureStates, model.latent, RegularizerWeights{});
  out.eY = terms.dataFit / static_cast<double>(N);
  out.perWindow =
      ((windows.sorted - model.pureStates * model.latent).colwise().squaredNorm() /
       static_cast<double>(n))
          .transpose();

  if (model.variant == Variant::Gaussian && model.gaussian && mcSamples > 0) {
    const GaussianStates& g = *model.gaussian;
    std::vector<double> draws(static_cast<std::size_t>(mcSamples));
    Vector sample(mcSamples);
    double total = 0.0;
    for (Index i = 0; i < N; ++i) {
      const double mu = g.mean.dot(model.latent.col(i));
      const double sd = g.sd.dot(model.latent.col(i));
      Rng rng(deriveSeed(seed, static_cast<std::uint64_t>(i)));
      for (auto& d : draws) d = mu + sd * normalQuantile(uniformOpen(rng));
      std::sort(draws.begin(), draws.end());
      for (Index s = 0; s < mcSamples; ++s)
        sample[s] = draws[static_cast<std::size_t>(s)];
      total += stepWasserstein2Squared(windows.sorted.col(i), sample);
    }
    out.eYMonteCarlo = total / static_cast<double>(N);
  }
  return out;
}

std::vector<std::pair<double, double>> cartesianGrid(
    const std::vector<double>& lambdaX, const std::vector<double>& lambdaQ) {
  std::vector<std::pair<double, double>> grid;
  grid.reserve(lambdaX.size() * lambdaQ.size());
  for (double lx : lambdaX)
    for (double lq : lambdaQ) grid.emplace_back(lx, lq);
  return grid;
}

std::vector<double> defaultLambdaLadder() {
  return {1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1};
}

std::vector<GridCell> lambdaGridSearch(
    const WindowedSeries& windows, const FitConfig& base,
    const std::vector<std::pair<double, double>>& grid,
    const GridOptions& options) {
  if (grid.empty()) throw dataError("empty regularization grid");
  base.validate();

  // Clustering does not depend on the weights; do it once up front.
  std::optional<std::vector<int>> labels = options.labels;
  if (!labels) labels = initialize(windows, base).metadata.labels;

  Matrix truthStates;
  Matrix truthLatent;
  if (options.truth) {
    const auto K = static_cast<Index>(options.truth->pureStates.size());
    truthStates.resize(options.oracleGrid, K);
    for (Index k = 0; k < K; ++k)
      truthStates.col(k) =
          quantileVectorOf(options.truth->pureStates[static_cast<std::size_t>(k)],
                           options.oracleGrid)
              .values();
    truthLatent = truthLatentAt(*options.truth, windows.starts, windows.windowSize);
  }

  std::vector<GridCell> cells(grid.size());
  auto runCell = [&](std::size_t i) {
    GridCell& cell = cells[i];
    cell.lambdaX = grid[i].first;
    cell.lambdaQ = grid[i].second;
    FitConfig cfg = base;
    cfg.weights = {cell.lambdaX, cell.lambdaQ};
    try {
      const DwbModel model = fit(windows, cfg, labels);
      cell.terms = evaluateObjective(windows.sorted, model.pureStates,
                                     model.latent, cfg.weights);
      cell.outerIterations = model.outerIterations;
      if (options.truth) {
        const GroundTruthErrors errs = groundTruthErrors(
            truthStates, model.pureStates, truthLatent, model.latent);
        cell.eQ = errs.eQ;
        cell.eX = errs.eX;
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  };

  unsigned threads = options.threads ? options.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(grid.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) runCell(i);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < grid.size(); i = next++) runCell(i);
    });
  for (auto& th : pool) th.join();
  return cells;
}

std::size_t groundTruthArgmin(const std::vector<GridCell>& cells) {
  std::size_t best = cells.size();
  double bestScore = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].ok || !cells[i].eQ || !cells[i].eX) continue;
    const double score = *cells[i].eQ + *cells[i].eX;
    if (score < bestScore) {
      bestScore = score;
      best = i;
    }
  }
  if (best == cells.size())
    throw dataError("no grid cell carries ground-truth errors");
  return best;
}

std::vector<SurfacePoint> lSurface(const std::vector<GridCell>& cells,
                                   Index windowCount, int numStates) {
  auto safeLog = [](double v) {
    return std::log10(std::max(v, std::numeric_limits<double>::min()));
  };
  std::vector<SurfacePoint> out;
  out.reserve(cells.size());
  for (const GridCell& c : cells) {
    if (!c.ok) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.push_back({c.lambdaX, c.lambdaQ, nan, nan, nan});
      continue;
    }
    out.push_back({c.lambdaX, c.lambdaQ,
                   safeLog(c.terms.dataFit / static_cast<double>(windowCount)),
                   safeLog(c.terms.rxTerm / static_cast<double>(windowCount)),
                   safeLog(c.terms.rqTerm / static_cast<double>(numStates))});
  }
  return out;
}

std::size_t maxCurvatureCorner(const std::vector<SurfacePoint>& surface,
                               std::size_t countX, std::size_t countQ) {
  if (surface.size() != countX * countQ)
    throw dataError("surface is not a cartesian grid of the given shape");
  if (countX < 3 && countQ < 3) throw dataError("grid too small for curvature");

  double lo[3], hi[3];
  for (int d = 0; d < 3; ++d) {
    lo[d] = std::numeric_limits<double>::infinity();
    hi[d] = -std::numeric_limits<double>::infinity();
  }
  auto coords = [](const SurfacePoint& p) {
    return Eigen::Vector3d(p.logDataFit, p.logRx, p.logRq);
  };
  for (const auto& p : surface) {
    const Eigen::Vector3d c = coords(p);
    for (int d = 0; d < 3; ++d) {
      if (!std::isfinite(c[d])) continue;
      lo[d] = std::min(lo[d], c[d]);
      hi[d] = std::max(hi[d], c[d]);
    }
  }
  auto normalized = [&](std::size_t i) {
    Eigen::Vector3d c = coords(surface[i]);
    for (int d = 0; d < 3; ++d)
      c[d] = hi[d] > lo[d] ? (c[d] - lo[d]) / (hi[d] - lo[d]) : 0.0;
    return c;
  };
  // Menger curvature 4 * area / (|ab| |bc| |ca|) of three consecutive points.
  auto menger = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Eigen::Vector3d pa = normalized(a), pb = normalized(b), pc = normalized(c);
    const double ab = (pb - pa).norm(), bc = (pc - pb).norm(), ca = (pa - pc).norm();
    const double denom = ab * bc * ca;
    if (!(denom > 0.0)) return 0.0;
    return 2.0 * (pb - pa).cross(pc - pa).norm() / denom;
  };

  std::size_t best = surface.size();
  double bestScore = -1.0;
  for (std::size_t ix = 0; ix < countX; ++ix) {
    for (std::size_t iq = 0; iq < countQ; ++iq) {
      const std::size_t i = ix * countQ + iq;
      if (!std::isfinite(surface[i].logDataFit)) continue;
      double score = 0.0;
      if (ix > 0 && ix + 1 < countX)
        score += menger(i - countQ, i, i + countQ);
      if (iq > 0 && iq + 1 < countQ) score += menger(i - 1, i, i + 1);
      if (!std::isfinite(score)) continue;
      if (score > bestScore) {
        bestScore = score;
        best = i;
      }
    }
  }
  if (best == surface.size()) throw dataError("surface has no finite points");
  return best;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table{
      {"msr", 250, {5e-2, 5e-3}, {5e-2, 2e-3}},
      {"bt", 100, {2e-1, 5e-2}, {2e-1, 2e-2}},
      {"sim", 100, {2e-1, 1e-2}, {1e-1, 2e-3}},
  };
  return table;
}

const Preset& presetNamed(const std::string& name) {
  for (const Preset& p : presets())
    if (p.name == name) return p;
  throw dataError("unknown preset '" + name + "' (expected msr, bt or sim)");
}

FitConfig applyPreset(const Preset& preset, Variant variant, FitConfig base) {
  base.windowSize = preset.windowSize;
  base.variant = variant;
  base.weights =
      variant == Variant::Gaussian ? preset.gaussian : preset.nonparametric;
  return base;
}

}  // namespace dwb
