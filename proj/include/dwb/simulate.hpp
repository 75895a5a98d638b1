#pragma once

// Ground-truth generation, window approximation error experiments, and the
// inverse-scaling construction that exhibits non-unique barycenter
// parameters.

#include <cstdint>
#include <limits>
#include <vector>

#include "dwb/ot_core.hpp"

namespace dwb {

/// Piecewise-linear latent trajectory over continuous time (seconds). Values
/// are held constant before the first knot and after the last.
class Trajectory {
 public:
  struct Knot {
    double time;
    Vector weights;
  };

  explicit Trajectory(std::vector<Knot> knots);

  Vector at(double time) const;
  Index dimension() const { return knots_.front().weights.size(); }
  const std::vector<Knot>& knots() const { return knots_; }

 private:
  std::vector<Knot> knots_;
};

struct GroundTruthSpec {
  std::vector<AnalyticDistribution> pureStates;
  Trajectory trajectory;
  double samplingRate = 200.0;  // Hz
  double duration = 9.0;        // seconds

  Index sampleCount() const;
  /// Latent state of 0-based sample t, taken at time (t + 1) / rate.
  Vector latentAtSample(double t) const;
  void validate() const;
};

/// Three pure states (bimodal Gaussian mixture, uniform on [-4, 4], five
/// near-point masses) visited 1 -> 2 -> 3 -> 1 with 1 s pauses and 2 s
/// linear transitions over 9 s.
GroundTruthSpec simulationPreset(double samplingRate = 200.0);

struct SimulatedSeries {
  std::vector<double> series;
  Matrix latentTruth;  // K x T
};

SimulatedSeries sampleSeries(const GroundTruthSpec& spec, std::uint64_t seed);

/// Two-state window approximation error experiment. The latent state is
/// [0.5, 0.5] throughout (constant) or moves linearly [1 - t/T, t/T]
/// (dynamic); the window is centered at t* = (T + 1) / 2.
struct WaeConfig {
  AnalyticDistribution first = AnalyticDistribution::gaussianFromVariance(0, 5);
  AnalyticDistribution second =
      AnalyticDistribution::gaussianFromVariance(10, 0.2);
  bool dynamic = false;
  Index length = 2000;  // T
  std::vector<Index> windowSizes{16, 64, 256, 1024};
  int trials = 10000;
  std::uint64_t seed = 0;
};

struct WaeRow {
  Index windowSize;
  double mean;
  double q25;
  double q75;
};

std::vector<WaeRow> waeExperiment(const WaeConfig& config);

/// Window size with the smallest mean error.
Index waeArgmin(const std::vector<WaeRow>& rows);

/// Linear-interpolation quantile of a sample (sorted internally).
double sampleQuantile(std::vector<double> values, double level);

struct AlphaRange {
  double alpha0;
  double alphaM;  // +inf when no gap constrains it
};

/// alpha0 is the smallest alpha keeping x0 + (xB - x0)/alpha on the simplex;
/// alphaM the largest keeping every column of P0 + alpha (Q - P0)
/// nondecreasing, with P0 = Q x0.
AlphaRange alphaRange(const SimplexWeight& xB, const SimplexWeight& x0,
                      const Matrix& pureStates);

struct InverseScaled {
  SimplexWeight weights;
  Matrix pureStates;
};

/// Reweighted pair describing the same barycenter as (xB, Q). Throws
/// "construction infeasible" outside [alpha0, alphaM].
InverseScaled inverseScaling(const SimplexWeight& xB, const SimplexWeight& x0,
                             double alpha, const Matrix& pureStates);

}  // namespace dwb
