#include "dwb/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "dwb/error.hpp"

namespace dwb {

Trajectory::Trajectory(std::vector<Knot> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) throw dataError("trajectory needs at least one knot");
  const Index K = knots_.front().weights.size();
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (knots_[i].weights.size() != K)
      throw dataError("trajectory knots differ in dimension");
    SimplexWeight check(knots_[i].weights);
    if (i > 0 && !(knots_[i].time >= knots_[i - 1].time))
      throw dataError("trajectory knot times must be nondecreasing");
  }
}

Vector Trajectory::at(double time) const {
  if (time <= knots_.front().time) return knots_.front().weights;
  if (time >= knots_.back().time) return knots_.back().weights;
  const auto next = std::upper_bound(
      knots_.begin(), knots_.end(), time,
      [](double t, const Knot& k) { return t < k.time; });
  const Knot& hi = *next;
  const Knot& lo = *(next - 1);
  const double span = hi.time - lo.time;
  if (span <= 0.0) return hi.weights;
  const double w = (time - lo.time) / span;
  return (1.0 - w) * lo.weights + w * hi.weights;
}

Index GroundTruthSpec::sampleCount() const {
  return static_cast<Index>(std::llround(samplingRate * duration));
}

Vector GroundTruthSpec::latentAtSample(double t) const {
  return trajectory.at((t + 1.0) / samplingRate);
}

void GroundTruthSpec::validate() const {
  if (!(samplingRate > 0.0)) throw dataError("sampling rate must be positive");
  if (!(duration > 0.0)) throw dataError("duration must be positive");
  if (static_cast<Index>(pureStates.size()) != trajectory.dimension())
    throw dataError("trajectory dimension does not match the pure states");
  if (pureStates.size() < 2) throw dataError("need at least two pure states");
}

GroundTruthSpec simulationPreset(double samplingRate) {
  using D = AnalyticDistribution;
  // The stated component weights 0.5 and 0.25 are normalized to 2/3, 1/3.
  D bimodal = D::mixture({{2.0 / 3.0, D::gaussianFromVariance(3.0, 0.25)},
                          {1.0 / 3.0, D::gaussianFromVariance(-3.0, 0.25)}});
  D flat = D::uniform(-4.0, 4.0);
  std::vector<std::pair<double, D>> spikes;
  for (double at : {-2.88, -0.74, -0.64, -0.41, 1.82})
    spikes.emplace_back(0.2, D::gaussianFromVariance(at, 1e-8));
  D peaked = D::mixture(std::move(spikes));

  auto e = [](Index k) {
    Vector v = Vector::Zero(3);
    v[k] = 1.0;
    return v;
  };
  Trajectory path({{0.0, e(0)},
                   {1.0, e(0)},
                   {3.0, e(1)},
                   {4.0, e(1)},
                   {6.0, e(2)},
                   {7.0, e(2)},
                   {9.0, e(0)}});
  return GroundTruthSpec{{bimodal, flat, peaked}, std::move(path), samplingRate,
                         9.0};
}

SimulatedSeries sampleSeries(const GroundTruthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Index T = spec.sampleCount();
  const Index K = static_cast<Index>(spec.pureStates.size());
  SimulatedSeries out;
  out.series.resize(static_cast<std::size_t>(T));
  out.latentTruth.resize(K, T);
  Rng rng(seed);
  for (Index t = 0; t < T; ++t) {
    Vector x = spec.latentAtSample(static_cast<double>(t));
    x = x.cwiseMax(0.0);
    x /= x.sum();
    out.latentTruth.col(t) = x;
    out.series[static_cast<std::size_t>(t)] =
        sampleFromBarycenter(SimplexWeight(x), spec.pureStates, rng);
  }
  return out;
}

double sampleQuantile(std::vector<double> values, double level) {
  if (values.empty()) throw dataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<WaeRow> waeExperiment(const WaeConfig& config) {
  if (config.trials < 1) throw dataError("trials must be positive");
  const Index T = config.length;
  const double tStar = 0.5 * static_cast<double>(T + 1);
  const std::vector<AnalyticDistribution> states{config.first, config.second};

  auto weightAt = [&](double t) {
    const double s = config.dynamic ? t / static_cast<double>(T) : 0.5;
    Vector x(2);
    x << 1.0 - s, s;
    return SimplexWeight(std::move(x));
  };
  const SimplexWeight target = weightAt(tStar);

  std::vector<WaeRow> rows;
  for (std::size_t ni = 0; ni < config.windowSizes.size(); ++ni) {
    const Index n = config.windowSizes[ni];
    if (n < 1 || n > T) throw dataError("window size must lie in [1, T]");
    const auto start = static_cast<Index>(
        std::ceil(tStar - 0.5 * static_cast<double>(n)));

    Matrix truthStates(n, 2);
    truthStates.col(0) = quantileVectorOf(config.first, n).values();
    truthStates.col(1) = quantileVectorOf(config.second, n).values();
    const QuantileVector truth = barycenterDQV(target, truthStates);

    std::vector<SimplexWeight> weights;
    weights.reserve(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
      weights.push_back(weightAt(static_cast<double>(start + j)));

    std::vector<double> errors(static_cast<std::size_t>(config.trials));
    std::vector<double> window(static_cast<std::size_t>(n));
    for (int trial = 0; trial < config.trials; ++trial) {
      Rng rng(deriveSeed(config.seed, static_cast<std::uint64_t>(trial)));
      for (Index j = 0; j < n; ++j)
        window[static_cast<std::size_t>(j)] = sampleFromBarycenter(
            weights[static_cast<std::size_t>(j)], states, rng);
      errors[static_cast<std::size_t>(trial)] =
          windowApproximationError(empiricalQuantileVector(window), truth);
    }
    double sum = 0.0;
    for (double e : errors) sum += e;
    rows.push_back({n, sum / static_cast<double>(errors.size()),
                    sampleQuantile(errors, 0.25), sampleQuantile(errors, 0.75)});
  }
  return rows;
}

Index waeArgmin(const std::vector<WaeRow>& rows) {
  if (rows.empty()) throw dataError("empty experiment table");
  const auto best = std::min_element(
      rows.begin(), rows.end(),
      [](const WaeRow& a, const WaeRow& b) { return a.mean < b.mean; });
  return best->windowSize;
}

AlphaRange alphaRange(const SimplexWeight& xB, const SimplexWeight& x0,
                      const Matrix& pureStates) {
  const Index K = xB.size();
  if (x0.size() != K || pureStates.cols() != K)
    throw dataError("inverse scaling inputs differ in dimension");
  const Vector dir = xB.weights() - x0.weights();
  if (dir.cwiseAbs().maxCoeff() == 0.0)
    throw dataError("x_B and x_0 must differ");

  double alpha0 = 0.0;
  for (Index k = 0; k < K; ++k)
    if (dir[k] < 0.0) alpha0 = std::max(alpha0, -dir[k] / x0[k]);

  const Vector reference = pureStates * x0.weights();
  double alphaM = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < K; ++k) {
    for (Index j = 0; j + 1 < pureStates.rows(); ++j) {
      const double g0 = reference[j + 1] - reference[j];
      const double gk = pureStates(j + 1, k) - pureStates(j, k);
      if (gk - g0 < 0.0) alphaM = std::min(alphaM, g0 / (g0 - gk));
    }
  }
  return {alpha0, alphaM};
}

InverseScaled inverseScaling(const SimplexWeight& xB, const SimplexWeight& x0,
                             double alpha, const Matrix& pureStates) {
  const AlphaRange range = alphaRange(xB, x0, pureStates);
  if (!(alpha >= range.alpha0 && alpha <= range.alphaM) ||
      !std::isfinite(alpha))
    throw dataError("construction infeasible");

  Vector x = x0.weights() + (xB.weights() - x0.weights()) / alpha;
  // Rounding at alpha0 can leave a coordinate a few ulps below zero.
  for (Index k = 0; k < x.size(); ++k)
    if (x[k] < 0.0 && x[k] > -1e-12) x[k] = 0.0;

  const Vector reference = pureStates * x0.weights();
  Matrix q = (alpha * (pureStates.colwise() - reference)).colwise() + reference;
  for (Index k = 0; k < q.cols(); ++k) {
    const double scale = 1.0 + q.col(k).cwiseAbs().maxCoeff();
    for (Index j = 1; j < q.rows(); ++j) {
      if (q(j, k) < q(j - 1, k)) {
        if (q(j - 1, k) - q(j, k) > 1e-12 * scale)
          throw dataError("construction infeasible");
        q(j, k) = q(j - 1, k);
      }
    }
  }
  return {SimplexWeight(std::move(x)), std::move(q)};
}

}  // namespace dwb
