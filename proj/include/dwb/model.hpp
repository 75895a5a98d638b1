#pragma once

// End-to-end fitting: windowing, spectral initialization, coordinate descent.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dwb/ot_core.hpp"
#include "dwb/regularizers.hpp"
#include "dwb/solver.hpp"

namespace dwb {

enum class Variant { Nonparametric, Gaussian };

std::string toString(Variant v);
Variant variantFromString(const std::string& s);

struct FitConfig {
  Index windowSize = 100;
  /// 0 selects stride = windowSize (disjoint windows).
  Index stride = 0;
  int numStates = 3;
  RegularizerWeights weights;
  SolverConfig solver;
  std::uint64_t seed = 0;
  Variant variant = Variant::Nonparametric;
  /// Similarity kernel exp(-bandwidth * A).
  double bandwidth = 1.0;
  /// First window start (0-based) and optional window count.
  Index firstStart = 0;
  std::optional<Index> windowCount;

  Index effectiveStride() const { return stride > 0 ? stride : windowSize; }
  void validate() const;
};

struct InitMetadata {
  std::string laplacian = "symmetric-normalized";
  double bandwidth = 1.0;
  int kmeansRestarts = 10;
  std::vector<int> labels;  // 0-based cluster per window
  bool labelsProvided = false;
};

struct DwbModel {
  Variant variant = Variant::Nonparametric;
  Matrix pureStates;  // n x K; materialized columns for the Gaussian variant
  std::optional<GaussianStates> gaussian;
  Matrix latent;  // K x N
  std::vector<ObjectiveTerms> lossTrace;
  int outerIterations = 0;
  bool converged = false;
  FitConfig config;
  InitMetadata init;
  std::vector<Index> windowStarts;

  Index windowSize() const { return pureStates.rows(); }
  int numStates() const { return static_cast<int>(pureStates.cols()); }
  Index windowCount() const { return latent.cols(); }
};

/// N = floor((T - n) / stride) + 1 sorted windows starting at 0.
WindowedSeries makeWindows(std::span<const double> series, Index windowSize,
                           Index stride);

/// Windows starting at firstStart; `count` caps the number of windows.
WindowedSeries makeWindows(std::span<const double> series, Index windowSize,
                           Index stride, Index firstStart,
                           std::optional<Index> count);

/// Windows for a fit config.
WindowedSeries makeWindows(std::span<const double> series,
                           const FitConfig& config);

/// q[j] = mu + sigma * Phi^{-1}((j + 0.5) / n).
QuantileVector gaussianStateDQV(double mu, double sigma, Index n);

/// Spectral initialization of the pure states; `labels` bypasses clustering.
struct Initialization {
  Matrix pureStates;
  Matrix latent;
  InitMetadata metadata;
};
Initialization initialize(const WindowedSeries& windows, const FitConfig& config,
                          const std::optional<std::vector<int>>& labels = {});

DwbModel fitNonparametric(std::span<const double> series,
                          const FitConfig& config);
DwbModel fitNonparametric(const WindowedSeries& windows, const FitConfig& config,
                          const std::optional<std::vector<int>>& labels = {});

DwbModel fitGaussian(std::span<const double> series, const FitConfig& config);
DwbModel fitGaussian(const WindowedSeries& windows, const FitConfig& config,
                     const std::optional<std::vector<int>>& labels = {});

/// Dispatches on config.variant.
DwbModel fit(std::span<const double> series, const FitConfig& config);
DwbModel fit(const WindowedSeries& windows, const FitConfig& config,
             const std::optional<std::vector<int>>& labels = {});

// Serialization. Matrices are stored row-major with explicit shapes.

inline constexpr const char* kModelSchema = "dwb-model/1";
inline constexpr const char* kConfigSchema = "dwb-config/1";

nlohmann::json matrixToJson(const Matrix& m);
Matrix matrixFromJson(const nlohmann::json& j);

nlohmann::json toJson(const FitConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
FitConfig fitConfigFromJson(const nlohmann::json& j,
                            const FitConfig& defaults = FitConfig{});

nlohmann::json toJson(const DwbModel& model);
DwbModel modelFromJson(const nlohmann::json& j);

/// Stable text form written to model files.
std::string serializeModel(const DwbModel& model);

}  // namespace dwb
