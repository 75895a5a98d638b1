#pragma once

// Ground-truth and data-fit metrics, state matching, and regularization
// grid searches.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dwb/model.hpp"
#include "dwb/simulate.hpp"

namespace dwb {

/// perm[k] is the learned state matched to truth state k.
using Permutation = std::vector<int>;

/// e_q between truth and learned states under a matching. The grids may
/// differ in size; each pair is compared with the exact step-function W2.
double pureStateError(const Matrix& truthStates, const Matrix& learnedStates,
                      const Permutation& perm);
/// Mean squared Euclidean distance between matched latent columns.
double latentError(const Matrix& truthLatent, const Matrix& learnedLatent,
                   const Permutation& perm);

/// Brute force over all K! matchings minimizing e_q + e_x. The first
/// minimizer in lexicographic order wins. K > 8 is rejected.
Permutation matchStates(const Matrix& truthStates, const Matrix& learnedStates,
                        const Matrix& truthLatent, const Matrix& learnedLatent);

struct GroundTruthErrors {
  double eQ = 0.0;
  double eX = 0.0;
  Permutation permutation;
};

GroundTruthErrors groundTruthErrors(const Matrix& truthStates,
                                    const Matrix& learnedStates,
                                    const Matrix& truthLatent,
                                    const Matrix& learnedLatent);

/// Truth states discretized at `oracleGrid` points; the truth latent path is
/// evaluated at the model's window centers.
GroundTruthErrors groundTruthErrors(const GroundTruthSpec& truth,
                                    const DwbModel& model,
                                    Index oracleGrid = 1000);

/// Truth latent path sampled at the centers of the given window starts.
Matrix truthLatentAt(const GroundTruthSpec& truth,
                     const std::vector<Index>& windowStarts, Index windowSize);

struct DataFitReport {
  double eY = 0.0;
  Vector perWindow;
  /// Gaussian variant only: e_y from sorted Monte-Carlo draws of each
  /// barycenter, compared to the window by step-function W2.
  std::optional<double> eYMonteCarlo;
};

DataFitReport dataFitError(const DwbModel& model, const WindowedSeries& windows,
                           Index mcSamples = 100000, std::uint64_t seed = 0);

struct EvalReport {
  double eQ = 0.0;
  double eX = 0.0;
  double eY = 0.0;
  std::optional<double> eYMonteCarlo;
  Permutation permutation;
  Vector perWindowFit;
};

// Regularization grid search.

struct GridCell {
  double lambdaX = 0.0;
  double lambdaQ = 0.0;
  bool ok = false;
  std::string error;
  ObjectiveTerms terms;  // at the fitted parameters
  int outerIterations = 0;
  std::optional<double> eQ;
  std::optional<double> eX;
};

struct GridOptions {
  /// When set, every cell is scored against the truth.
  const GroundTruthSpec* truth = nullptr;
  Index oracleGrid = 1000;
  /// Reuse one clustering across all cells.
  std::optional<std::vector<int>> labels;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Row-major cartesian product, lambdaX varying slowest.
std::vector<std::pair<double, double>> cartesianGrid(
    const std::vector<double>& lambdaX, const std::vector<double>& lambdaQ);

/// The standard ladder 1e-4, 2e-4, 5e-4, ..., 1e-1.
std::vector<double> defaultLambdaLadder();

/// One fit per cell; failures are recorded in the cell instead of thrown.
std::vector<GridCell> lambdaGridSearch(
    const WindowedSeries& windows, const FitConfig& base,
    const std::vector<std::pair<double, double>>& grid,
    const GridOptions& options = {});

/// Index of the successful cell with the smallest e_x + e_q.
std::size_t groundTruthArgmin(const std::vector<GridCell>& cells);

struct SurfacePoint {
  double lambdaX;
  double lambdaQ;
  double logDataFit;  // log10 of e_y
  double logRx;       // log10 of R_x / N
  double logRq;       // log10 of R_q / K
};

std::vector<SurfacePoint> lSurface(const std::vector<GridCell>& cells,
                                   Index windowCount, int numStates);

/// Optional corner heuristic for a cartesian grid: the interior cell whose
/// surface point has the largest summed Menger curvature along both axes,
/// after normalizing each coordinate to [0, 1].
std::size_t maxCurvatureCorner(const std::vector<SurfacePoint>& surface,
                               std::size_t countX, std::size_t countQ);

// Named configurations for the three datasets.

struct Preset {
  std::string name;
  Index windowSize;
  RegularizerWeights nonparametric;
  RegularizerWeights gaussian;
};

const std::vector<Preset>& presets();
const Preset& presetNamed(const std::string& name);
/// Applies a preset's window and weights for the given variant to `base`.
FitConfig applyPreset(const Preset& preset, Variant variant,
                      FitConfig base = FitConfig{});

}  // namespace dwb
