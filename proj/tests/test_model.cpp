#include <random>

#include "helpers.hpp"

#include "dwb/model.hpp"
#include "dwb/simulate.hpp"

using namespace dwb;
using testing::requireError;

namespace {

std::vector<double> ramp(Index T) {
  std::vector<double> s(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) s[static_cast<std::size_t>(t)] = static_cast<double>(T - t);
  return s;
}

}  // namespace

TEST_CASE("disjoint windows by default") {
  const auto series = ramp(1800);
  FitConfig cfg;
  const WindowedSeries w = makeWindows(series, cfg);
  CHECK(w.count() == 18);
  CHECK(w.starts[1] == 100);
  CHECK(w.center(0) == doctest::Approx(49.5));
  // Columns are sorted copies of the window samples.
  CHECK(w.sorted(0, 0) == 1701.0);
  CHECK(w.sorted(99, 0) == 1800.0);
}

TEST_CASE("window count follows floor((T - n) / stride) + 1") {
  const auto series = ramp(1050);
  CHECK(makeWindows(series, 100, 100).count() == 10);
  CHECK(makeWindows(series, 100, 30).count() == 32);
  CHECK(makeWindows(series, 1050, 7).count() == 1);
  const WindowedSeries sub = makeWindows(series, 100, 50, 25, Index{4});
  CHECK(sub.count() == 4);
  CHECK(sub.starts.front() == 25);
  CHECK(sub.starts.back() == 175);
}

TEST_CASE("windowing rejects bad shapes and values") {
  const auto series = ramp(50);
  requireError([&] { makeWindows(series, 100, 100); }, "series shorter than window");
  requireError([&] { makeWindows(series, 10, 10, 0, Index{9}); }, "requested 9");
  auto bad = series;
  bad[7] = std::numeric_limits<double>::infinity();
  requireError([&] { makeWindows(bad, 10, 10); }, "non-finite value at index 7");
}

TEST_CASE("fit config validation") {
  FitConfig c;
  c.numStates = 1;
  requireError([&] { c.validate(); }, "at least 2");
  c = FitConfig{};
  c.windowSize = 2;
  requireError([&] { c.validate(); }, "at least the number of states");
  c = FitConfig{};
  c.bandwidth = 0.0;
  requireError([&] { c.validate(); }, "bandwidth");
  CHECK((variantFromString("gauss") == Variant::Gaussian));
  requireError([] { variantFromString("np2"); }, "unknown variant");
}

TEST_CASE("Gaussian state DQV sits on the normal grid") {
  const QuantileVector q = gaussianStateDQV(5.0, 2.0, 4);
  CHECK(q[0] == doctest::Approx(5.0 + 2.0 * normalQuantile(0.125)));
  CHECK(q[3] == doctest::Approx(5.0 - 2.0 * normalQuantile(0.125)));
}

TEST_CASE("fits on the simulated preset are deterministic and feasible") {
  const auto sim = sampleSeries(simulationPreset(), 5);
  FitConfig cfg;
  cfg.weights = {0.2, 0.01};
  cfg.seed = 3;
  const DwbModel a = fit(sim.series, cfg);
  const DwbModel b = fit(sim.series, cfg);
  CHECK(serializeModel(a) == serializeModel(b));
  CHECK(a.numStates() == 3);
  CHECK(a.windowCount() == 18);
  CHECK(a.windowSize() == 100);
  for (std::size_t i = 1; i < a.lossTrace.size(); ++i)
    CHECK(a.lossTrace[i].total <= a.lossTrace[i - 1].total);
  CHECK(a.lossTrace.front().total > a.lossTrace.back().total);
  CHECK(a.init.labels.size() == 18);
  CHECK_FALSE(a.init.labelsProvided);
}

TEST_CASE("Gaussian fit materializes its columns") {
  const auto sim = sampleSeries(simulationPreset(), 6);
  FitConfig cfg;
  cfg.variant = Variant::Gaussian;
  cfg.weights = {0.1, 0.002};
  const DwbModel m = fit(sim.series, cfg);
  REQUIRE(m.gaussian);
  const Vector z = standardNormalGrid(100);
  CHECK((m.gaussian->materialize(z) - m.pureStates).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 1; i < m.lossTrace.size(); ++i)
    CHECK(m.lossTrace[i].total <= m.lossTrace[i - 1].total);
}

TEST_CASE("supplied labels bypass clustering") {
  const auto sim = sampleSeries(simulationPreset(), 7);
  FitConfig cfg;
  const WindowedSeries w = makeWindows(sim.series, cfg);
  std::vector<int> labels;
  for (Index i = 0; i < w.count(); ++i) labels.push_back(static_cast<int>(i % 3));
  const DwbModel m = fit(w, cfg, labels);
  CHECK(m.init.labels == labels);
  CHECK(m.init.labelsProvided);
  requireError([&] { fit(w, cfg, std::vector<int>{0, 1, 2}); }, "label count");
}

TEST_CASE("model and config JSON round trip") {
  const auto sim = sampleSeries(simulationPreset(), 8);
  FitConfig cfg;
  cfg.variant = Variant::Gaussian;
  cfg.stride = 50;
  cfg.windowCount = 20;
  cfg.solver.maxOuterIters = 7;
  const DwbModel m = fit(sim.series, cfg);
  const std::string text = serializeModel(m);
  const DwbModel back = modelFromJson(nlohmann::json::parse(text));
  CHECK(serializeModel(back) == text);
  CHECK(back.config.windowCount == Index{20});
  CHECK(back.config.solver.maxOuterIters == 7);

  const FitConfig c2 = fitConfigFromJson(toJson(cfg));
  CHECK(toJson(c2) == toJson(cfg));
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  using nlohmann::json;
  requireError([] { fitConfigFromJson(json{{"windw", 3}}); }, "unknown key 'windw'");
  requireError([] { fitConfigFromJson(json{{"window", "big"}}); }, "bad config value");
  requireError([] { fitConfigFromJson(json{{"schema", "dwb-config/9"}}); },
               "unsupported config schema");
  requireError([] { fitConfigFromJson(json{{"solver", {{"etta", 1}}}}); },
               "unknown key 'etta'");
  const FitConfig c = fitConfigFromJson(json{{"window", 64}, {"lambda_x", 0.5}});
  CHECK(c.windowSize == 64);
  CHECK(c.weights.lambdaX == 0.5);
  CHECK(c.numStates == 3);
}

TEST_CASE("malformed model documents are data errors") {
  requireError([] { modelFromJson(nlohmann::json{{"schema", "dwb-model/1"}}); },
               "malformed model document");
  requireError([] { matrixFromJson(nlohmann::json{{"rows", 2}, {"cols", 2}, {"data", {1}}}); },
               "shape");
}
