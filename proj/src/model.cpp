#include "dwb/model.hpp"

#include <cmath>

#include "dwb/error.hpp"
#include "dwb/init.hpp"

namespace dwb {

std::string toString(Variant v) {
  return v == Variant::Gaussian ? "gauss" : "np";
}

Variant variantFromString(const std::string& s) {
  if (s == "np" || s == "nonparametric") return Variant::Nonparametric;
  if (s == "gauss" || s == "gaussian") return Variant::Gaussian;
  throw dataError("unknown variant '" + s + "' (expected np or gauss)");
}

void FitConfig::validate() const {
  if (numStates < 2) throw dataError("numStates must be at least 2");
  if (windowSize < numStates)
    throw dataError("window size must be at least the number of states");
  if (stride < 0) throw dataError("stride must be positive");
  if (firstStart < 0) throw dataError("first window start must be nonnegative");
  if (windowCount && *windowCount < 1)
    throw dataError("window count must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw dataError("bandwidth must be positive");
  weights.validate();
  solver.validate();
}

WindowedSeries makeWindows(std::span<const double> series, Index windowSize,
                           Index stride, Index firstStart,
                           std::optional<Index> count) {
  if (windowSize < 1) throw dataError("window size must be positive");
  if (stride < 1) throw dataError("stride must be positive");
  const Index T = static_cast<Index>(series.size());
  if (T - firstStart < windowSize) throw dataError("series shorter than window");
  for (Index t = 0; t < T; ++t)
    if (!std::isfinite(series[static_cast<std::size_t>(t)]))
      throw dataError("series has a non-finite value at index " +
                      std::to_string(t));

  const Index available = (T - firstStart - windowSize) / stride + 1;
  const Index N = count ? *count : available;
  if (N > available)
    throw dataError("requested " + std::to_string(N) +
                    " windows but the series holds " +
                    std::to_string(available));

  WindowedSeries w;
  w.windowSize = windowSize;
  w.stride = stride;
  w.sorted.resize(windowSize, N);
  w.starts.reserve(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    const Index start = firstStart + i * stride;
    w.starts.push_back(start);
    const QuantileVector q = empiricalQuantileVector(
        series.subspan(static_cast<std::size_t>(start),
                       static_cast<std::size_t>(windowSize)));
    w.sorted.col(i) = q.values();
  }
  return w;
}

WindowedSeries makeWindows(std::span<const double> series, Index windowSize,
                           Index stride) {
  return makeWindows(series, windowSize, stride, 0, std::nullopt);
}

WindowedSeries makeWindows(std::span<const double> series,
                           const FitConfig& config) {
  return makeWindows(series, config.windowSize, config.effectiveStride(),
                     config.firstStart, config.windowCount);
}

QuantileVector gaussianStateDQV(double mu, double sigma, Index n) {
  if (!(sigma >= 0.0)) throw dataError("gaussian sd must be nonnegative");
  if (n < 1) throw dataError("discretization must be positive");
  Vector q(n);
  for (Index j = 0; j < n; ++j)
    q[j] = mu + sigma * normalQuantile(quantileLevel(j, n));
  return QuantileVector(std::move(q));
}

Initialization initialize(const WindowedSeries& windows, const FitConfig& config,
                          const std::optional<std::vector<int>>& labels) {
  const int K = config.numStates;
  if (windows.count() < K)
    throw dataError("need at least as many windows as states (have " +
                    std::to_string(windows.count()) + ")");
  Initialization init;
  init.metadata.bandwidth = config.bandwidth;
  if (labels) {
    if (static_cast<Index>(labels->size()) != windows.count())
      throw dataError("label count does not match window count");
    init.metadata.labels = *labels;
    init.metadata.labelsProvided = true;
  } else {
    const Matrix similarity =
        (-config.bandwidth * windowAffinity(windows)).array().exp().matrix();
    init.metadata.labels = spectralCluster(similarity, K, config.seed);
  }
  init.pureStates = initialPureStates(windows.sorted, init.metadata.labels, K);
  init.latent = initialLatentPath(K, windows.count());
  return init;
}

namespace {

DwbModel assemble(const DescentResult& result, const FitConfig& config,
                  const Initialization& init, const WindowedSeries& windows) {
  DwbModel model;
  model.variant = config.variant;
  model.pureStates = result.pureStates;
  model.latent = result.latent;
  model.lossTrace = result.trace;
  model.outerIterations = result.outerIterations;
  model.converged = result.converged;
  model.config = config;
  model.init = init.metadata;
  model.windowStarts = windows.starts;
  if (config.variant == Variant::Gaussian) model.gaussian = result.gaussian;
  return model;
}

}  // namespace

DwbModel fitNonparametric(const WindowedSeries& windows, const FitConfig& config,
                          const std::optional<std::vector<int>>& labels) {
  FitConfig cfg = config;
  cfg.variant = Variant::Nonparametric;
  cfg.validate();
  if (windows.windowSize != cfg.windowSize)
    throw dataError("windows do not match the configured window size");
  const Initialization init = initialize(windows, cfg, labels);
  const DescentResult result = coordinateDescent(
      windows.sorted, init.pureStates, init.latent, cfg.weights, cfg.solver);
  return assemble(result, cfg, init, windows);
}

DwbModel fitNonparametric(std::span<const double> series,
                          const FitConfig& config) {
  config.validate();
  return fitNonparametric(makeWindows(series, config), config);
}

DwbModel fitGaussian(const WindowedSeries& windows, const FitConfig& config,
                     const std::optional<std::vector<int>>& labels) {
  FitConfig cfg = config;
  cfg.variant = Variant::Gaussian;
  cfg.validate();
  if (windows.windowSize != cfg.windowSize)
    throw dataError("windows do not match the configured window size");
  const Initialization init = initialize(windows, cfg, labels);

  // Moment fit of each cluster-mean quantile vector.
  const Index K = init.pureStates.cols();
  GaussianStates start{Vector(K), Vector(K)};
  for (Index k = 0; k < K; ++k) {
    const Vector& q = init.pureStates.col(k);
    const double mean = q.mean();
    const double var = (q.array() - mean).square().mean();
    start.mean[k] = mean;
    start.sd[k] = std::max(std::sqrt(var), GaussianStates::kMinSd);
  }
  const DescentResult result = coordinateDescentGaussian(
      windows.sorted, start, init.latent, cfg.weights, cfg.solver);
  return assemble(result, cfg, init, windows);
}

DwbModel fitGaussian(std::span<const double> series, const FitConfig& config) {
  config.validate();
  return fitGaussian(makeWindows(series, config), config);
}

DwbModel fit(std::span<const double> series, const FitConfig& config) {
  return config.variant == Variant::Gaussian ? fitGaussian(series, config)
                                             : fitNonparametric(series, config);
}

DwbModel fit(const WindowedSeries& windows, const FitConfig& config,
             const std::optional<std::vector<int>>& labels) {
  return config.variant == Variant::Gaussian
             ? fitGaussian(windows, config, labels)
             : fitNonparametric(windows, config, labels);
}

// ---------------------------------------------------------------------------
// Serialization

using nlohmann::json;

json matrixToJson(const Matrix& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrixFromJson(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw dataError("matrix shape does not match its data length");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

namespace {

json toJson(const SolverConfig& s) {
  return json{{"eta", s.eta},
              {"eta_relative", s.etaRelative},
              {"max_outer_iters", s.maxOuterIters},
              {"max_inner_iters", s.maxInnerIters},
              {"eps_simplex", s.epsSimplex},
              {"eps_mono", s.epsMono},
              {"line_search_shrink", s.lineSearchShrink},
              {"armijo_c", s.armijoC},
              {"inner_tol", s.innerTol}};
}

template <class T>
void readKey(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void rejectUnknown(const json& j, std::initializer_list<const char*> known,
                   const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const char* k : known) found = found || it.key() == k;
    if (!found) throw dataError("unknown key '" + it.key() + "' in " + where);
  }
}

SolverConfig solverFromJson(const json& j, SolverConfig s) {
  rejectUnknown(j,
                {"eta", "eta_relative", "max_outer_iters", "max_inner_iters",
                 "eps_simplex", "eps_mono", "line_search_shrink", "armijo_c",
                 "inner_tol"},
                "solver config");
  readKey(j, "eta", s.eta);
  readKey(j, "eta_relative", s.etaRelative);
  readKey(j, "max_outer_iters", s.maxOuterIters);
  readKey(j, "max_inner_iters", s.maxInnerIters);
  readKey(j, "eps_simplex", s.epsSimplex);
  readKey(j, "eps_mono", s.epsMono);
  readKey(j, "line_search_shrink", s.lineSearchShrink);
  readKey(j, "armijo_c", s.armijoC);
  readKey(j, "inner_tol", s.innerTol);
  return s;
}

json traceToJson(const std::vector<ObjectiveTerms>& trace) {
  json out = json::array();
  for (const auto& t : trace)
    out.push_back(json{{"data_fit", t.dataFit},
                       {"rx", t.rxTerm},
                       {"rq", t.rqTerm},
                       {"total", t.total}});
  return out;
}

}  // namespace

json toJson(const FitConfig& c) {
  return json{{"schema", kConfigSchema},
              {"window", c.windowSize},
              {"stride", c.effectiveStride()},
              {"states", c.numStates},
              {"lambda_x", c.weights.lambdaX},
              {"lambda_q", c.weights.lambdaQ},
              {"seed", c.seed},
              {"variant", toString(c.variant)},
              {"bandwidth", c.bandwidth},
              {"first_start", c.firstStart},
              {"window_count",
               c.windowCount ? json(*c.windowCount) : json(nullptr)},
              {"solver", toJson(c.solver)}};
}

FitConfig fitConfigFromJson(const json& j, const FitConfig& defaults) {
  if (!j.is_object()) throw dataError("config must be a JSON object");
  rejectUnknown(j,
                {"schema", "window", "stride", "states", "lambda_x", "lambda_q",
                 "seed", "variant", "bandwidth", "first_start", "window_count",
                 "solver", "preset"},
                "fit config");
  if (auto it = j.find("schema"); it != j.end() && *it != kConfigSchema)
    throw dataError("unsupported config schema " + it->dump());
  FitConfig c = defaults;
  try {
    readKey(j, "window", c.windowSize);
    readKey(j, "stride", c.stride);
    readKey(j, "states", c.numStates);
    readKey(j, "lambda_x", c.weights.lambdaX);
    readKey(j, "lambda_q", c.weights.lambdaQ);
    readKey(j, "seed", c.seed);
    if (auto it = j.find("variant"); it != j.end())
      c.variant = variantFromString(it->get<std::string>());
    readKey(j, "bandwidth", c.bandwidth);
    readKey(j, "first_start", c.firstStart);
    if (auto it = j.find("window_count"); it != j.end() && !it->is_null())
      c.windowCount = it->get<Index>();
    if (auto it = j.find("solver"); it != j.end())
      c.solver = solverFromJson(*it, c.solver);
  } catch (const json::exception& e) {
    throw dataError(std::string("bad config value: ") + e.what());
  }
  return c;
}

json toJson(const DwbModel& m) {
  json init{{"laplacian", m.init.laplacian},
            {"bandwidth", m.init.bandwidth},
            {"kmeans_restarts", m.init.kmeansRestarts},
            {"labels", m.init.labels},
            {"labels_provided", m.init.labelsProvided}};
  json gaussian = nullptr;
  if (m.gaussian) {
    gaussian = json{{"mean", std::vector<double>(m.gaussian->mean.begin(),
                                                 m.gaussian->mean.end())},
                    {"sd", std::vector<double>(m.gaussian->sd.begin(),
                                               m.gaussian->sd.end())}};
  }
  return json{{"schema", kModelSchema},
              {"variant", toString(m.variant)},
              {"config", toJson(m.config)},
              {"pure_states", matrixToJson(m.pureStates)},
              {"gaussian", std::move(gaussian)},
              {"latent", matrixToJson(m.latent)},
              {"window_starts", m.windowStarts},
              {"loss_trace", traceToJson(m.lossTrace)},
              {"outer_iterations", m.outerIterations},
              {"converged", m.converged},
              {"init", std::move(init)}};
}

DwbModel modelFromJson(const json& j) {
  try {
    if (j.at("schema") != kModelSchema)
      throw dataError("unsupported model schema " + j.at("schema").dump());
    DwbModel m;
    m.variant = variantFromString(j.at("variant").get<std::string>());
    m.config = fitConfigFromJson(j.at("config"));
    m.pureStates = matrixFromJson(j.at("pure_states"));
    m.latent = matrixFromJson(j.at("latent"));
    if (m.latent.rows() != m.pureStates.cols())
      throw dataError("latent rows do not match the number of pure states");
    if (const json& g = j.at("gaussian"); !g.is_null()) {
      const auto mean = g.at("mean").get<std::vector<double>>();
      const auto sd = g.at("sd").get<std::vector<double>>();
      GaussianStates s{Eigen::Map<const Vector>(mean.data(),
                                                static_cast<Index>(mean.size())),
                       Eigen::Map<const Vector>(sd.data(),
                                                static_cast<Index>(sd.size()))};
      m.gaussian = std::move(s);
    }
    m.windowStarts = j.at("window_starts").get<std::vector<Index>>();
    for (const json& t : j.at("loss_trace"))
      m.lossTrace.push_back({t.at("data_fit").get<double>(),
                             t.at("rx").get<double>(), t.at("rq").get<double>(),
                             t.at("total").get<double>()});
    m.outerIterations = j.at("outer_iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
    const json& init = j.at("init");
    m.init.laplacian = init.at("laplacian").get<std::string>();
    m.init.bandwidth = init.at("bandwidth").get<double>();
    m.init.kmeansRestarts = init.at("kmeans_restarts").get<int>();
    m.init.labels = init.at("labels").get<std::vector<int>>();
    m.init.labelsProvided = init.at("labels_provided").get<bool>();
    return m;
  } catch (const json::exception& e) {
    throw dataError(std::string("malformed model document: ") + e.what());
  }
}

std::string serializeModel(const DwbModel& model) {
  return toJson(model).dump(2) + "\n";
}

}  // namespace dwb
