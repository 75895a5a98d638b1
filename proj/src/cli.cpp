#include "dwb/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

#include "CLI11.hpp"

#include "dwb/error.hpp"
#include "dwb/eval.hpp"
#include "dwb/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dwb::cli {

// ---------------------------------------------------------------------------
// Files

std::string readTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dataError("cannot open input file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parseNumber(std::string_view s, double& out) {
  // strtod accepts forms like "1e-3" and "+2" that from_chars rejects.
  const std::string owned(s);
  char* end = nullptr;
  out = std::strtod(owned.c_str(), &end);
  return !owned.empty() && end == owned.c_str() + owned.size();
}

std::string lineTag(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

std::vector<double> parseSeries(std::string_view text, const std::string& source) {
  std::vector<double> values;
  bool sawContent = false;
  std::size_t lineNo = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++lineNo;
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    if (line.find(',') != std::string_view::npos)
      throw dataError(lineTag(source, lineNo) + ": expected a single column");
    double v = 0.0;
    if (!parseNumber(line, v)) {
      if (!sawContent) {
        sawContent = true;  // header row
        continue;
      }
      throw dataError(lineTag(source, lineNo) + ": not a number: '" +
                      std::string(line) + "'");
    }
    if (!std::isfinite(v))
      throw dataError(lineTag(source, lineNo) + ": non-finite value");
    sawContent = true;
    values.push_back(v);
  }
  if (values.empty()) throw dataError(source + ": no samples");
  return values;
}

std::vector<double> readSeriesFile(const fs::path& path) {
  return parseSeries(readTextFile(path), path.string());
}

json parseJson(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const auto line =
        1 + std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n');
    throw dataError(lineTag(source, static_cast<std::size_t>(line)) +
                    ": JSON parse error: " + e.what());
  }
}

json readJsonFile(const fs::path& path) {
  return parseJson(readTextFile(path), path.string());
}

void writeFileAtomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw dataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw dataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw dataError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr))
    throw numericalError("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string formatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Distributions and ground-truth specs

json toJson(const AnalyticDistribution& d) {
  using K = AnalyticDistribution::Kind;
  switch (d.kind()) {
    case K::Gaussian:
      return json{{"type", "gaussian"},
                  {"mean", d.asGaussian().mean},
                  {"sd", d.asGaussian().sd}};
    case K::Uniform:
      return json{{"type", "uniform"},
                  {"lo", d.asUniform().lo},
                  {"hi", d.asUniform().hi}};
    case K::PointMass:
      return json{{"type", "point"}, {"at", d.asPointMass().at}};
    case K::Mixture: {
      json parts = json::array();
      for (const auto& c : d.asMixture())
        parts.push_back(json{{"weight", c.weight}, {"dist", toJson(c.dist)}});
      return json{{"type", "mixture"}, {"components", std::move(parts)}};
    }
  }
  throw dataError("unknown distribution kind");
}

AnalyticDistribution distributionFromJson(const json& j) {
  if (!j.is_object()) throw dataError("distribution must be an object");
  const std::string type = j.value("type", "");
  try {
    if (type == "gaussian") {
      const double mean = j.at("mean").get<double>();
      const bool hasSd = j.contains("sd");
      const bool hasVar = j.contains("variance");
      if (hasSd == hasVar)
        throw dataError("gaussian needs exactly one of 'sd' or 'variance'");
      return hasSd ? AnalyticDistribution::gaussian(mean, j.at("sd").get<double>())
                   : AnalyticDistribution::gaussianFromVariance(
                         mean, j.at("variance").get<double>());
    }
    if (type == "uniform")
      return AnalyticDistribution::uniform(j.at("lo").get<double>(),
                                           j.at("hi").get<double>());
    if (type == "point")
      return AnalyticDistribution::pointMass(j.at("at").get<double>());
    if (type == "mixture") {
      std::vector<std::pair<double, AnalyticDistribution>> parts;
      for (const json& c : j.at("components"))
        parts.emplace_back(c.at("weight").get<double>(),
                           distributionFromJson(c.at("dist")));
      return AnalyticDistribution::mixture(std::move(parts));
    }
  } catch (const json::exception& e) {
    throw dataError(std::string("bad distribution field: ") + e.what());
  }
  throw dataError("unknown distribution type '" + type +
                  "' (expected gaussian, uniform, point or mixture)");
}

json toJson(const GroundTruthSpec& spec) {
  json states = json::array();
  for (const auto& d : spec.pureStates) states.push_back(toJson(d));
  json knots = json::array();
  for (const auto& k : spec.trajectory.knots())
    knots.push_back(json{{"time", k.time},
                         {"weights", std::vector<double>(k.weights.begin(),
                                                         k.weights.end())}});
  return json{{"schema", kSpecSchema},
              {"sampling_rate", spec.samplingRate},
              {"duration", spec.duration},
              {"pure_states", std::move(states)},
              {"trajectory", std::move(knots)}};
}

namespace {

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void unknownKeys(const json& j, std::initializer_list<const char*> known,
                 std::vector<std::string>& problems) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return it.key() == k; }))
      problems.push_back("unknown field '" + it.key() + "'");
}

std::optional<double> positiveField(const json& j, const char* key,
                                    std::vector<std::string>& problems) {
  const auto it = j.find(key);
  if (it == j.end()) {
    problems.push_back(std::string(key) + ": missing");
    return std::nullopt;
  }
  if (!it->is_number() || !(it->get<double>() > 0.0)) {
    problems.push_back(std::string(key) + ": must be a positive number");
    return std::nullopt;
  }
  return it->get<double>();
}

}  // namespace

GroundTruthSpec groundTruthSpecFromJson(const json& j) {
  if (!j.is_object()) throw dataError("invalid spec: must be a JSON object");
  std::vector<std::string> problems;
  auto fail = [&] {
    throw dataError("invalid spec: " + join(problems, "; "));
  };

  if (j.contains("preset")) {
    unknownKeys(j, {"schema", "preset", "sampling_rate"}, problems);
    const json& name = j.at("preset");
    if (!name.is_string() || name.get<std::string>() != "sim")
      problems.push_back("preset: unknown (expected \"sim\")");
    double rate = 200.0;
    if (j.contains("sampling_rate")) {
      if (auto r = positiveField(j, "sampling_rate", problems)) rate = *r;
    }
    if (!problems.empty()) fail();
    return simulationPreset(rate);
  }

  unknownKeys(j, {"schema", "sampling_rate", "duration", "pure_states", "trajectory"},
              problems);
  if (auto it = j.find("schema"); it != j.end() && *it != kSpecSchema)
    problems.push_back("schema: expected \"" + std::string(kSpecSchema) + "\"");
  const auto rate = positiveField(j, "sampling_rate", problems);
  const auto duration = positiveField(j, "duration", problems);

  std::vector<AnalyticDistribution> states;
  if (auto it = j.find("pure_states"); it == j.end() || !it->is_array()) {
    problems.push_back("pure_states: missing or not a list");
  } else {
    if (it->size() < 2) problems.push_back("pure_states: need at least two");
    for (std::size_t k = 0; k < it->size(); ++k) {
      try {
        states.push_back(distributionFromJson((*it)[k]));
      } catch (const Error& e) {
        problems.push_back("pure_states[" + std::to_string(k) + "]: " + e.what());
      }
    }
  }

  std::vector<Trajectory::Knot> knots;
  if (auto it = j.find("trajectory"); it == j.end() || !it->is_array() ||
                                      it->empty()) {
    problems.push_back("trajectory: missing or empty");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "trajectory[" + std::to_string(i) + "]";
      const json& k = (*it)[i];
      try {
        const double time = k.at("time").get<double>();
        const auto w = k.at("weights").get<std::vector<double>>();
        Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
        if (!states.empty() && weights.size() != static_cast<Index>(states.size()))
          problems.push_back(where + ": weights length differs from pure_states");
        SimplexWeight check(weights);
        if (!knots.empty() && time < knots.back().time)
          problems.push_back(where + ": time decreases");
        knots.push_back({time, std::move(weights)});
      } catch (const json::exception&) {
        problems.push_back(where + ": needs numeric 'time' and 'weights'");
      } catch (const Error& e) {
        problems.push_back(where + ": " + e.what());
      }
    }
  }
  if (!problems.empty()) fail();
  return GroundTruthSpec{std::move(states), Trajectory(std::move(knots)), *rate,
                         *duration};
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> artifacts;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  std::string inputDigest() const {
    std::string all;
    for (const auto& in : inputs) all += in.second + "\n";
    return sha256Hex(all);
  }
  /// Depends only on what determines the outputs.
  std::string digest() const {
    return sha256Hex(json{{"command", command},
                          {"config", config},
                          {"seed", seed},
                          {"input_digest", inputDigest()}}
                         .dump());
  }
};

class Output {
 public:
  Output(fs::path dir, Manifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw dataError("cannot create output directory '" + dir_.string() + "'");
  }

  void write(const std::string& name, std::string_view content) {
    writeFileAtomic(dir_ / name, content);
    manifest_.artifacts.push_back(name);
  }

  /// CSV with the manifest digest comment line and a header row.
  void writeCsv(const std::string& name, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
    std::string text = "# manifest-digest: " + manifest_.digest() + "\n";
    text += join(header, ",") + "\n";
    for (const auto& r : rows) text += join(r, ",") + "\n";
    write(name, text);
  }

  void finish() {
    const double wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - manifest_.started)
            .count();
    manifest_.artifacts.push_back("manifest.json");
    json inputs = json::array();
    for (const auto& in : manifest_.inputs)
      inputs.push_back(json{{"path", in.first}, {"sha256", in.second}});
    const json doc{{"schema", kManifestSchema},
                   {"command", manifest_.command},
                   {"config", manifest_.config},
                   {"seed", manifest_.seed},
                   {"inputs", std::move(inputs)},
                   {"input_digest", manifest_.inputDigest()},
                   {"artifacts", manifest_.artifacts},
                   {"digest", manifest_.digest()},
                   {"wall_time_s", wallSeconds}};
    writeFileAtomic(dir_ / "manifest.json", doc.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  Manifest& manifest_;
};

std::string addInput(Manifest& m, const std::string& path) {
  std::string text = readTextFile(path);
  m.inputs.emplace_back(path, sha256Hex(text));
  return text;
}

template <class T>
std::string str(T v) {
  if constexpr (std::is_floating_point_v<T>)
    return formatDouble(v);
  else
    return std::to_string(v);
}

// Options shared by commands that fit models.
struct FitFlags {
  std::string configPath;
  std::string preset;
  std::string variant;
  std::uint64_t seed = 0;
  Index window = 0;
  Index stride = 0;
  int states = 0;
  double lambdaX = 0.0;
  double lambdaQ = 0.0;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* cmd) {
    opts["config"] = cmd->add_option("--config", configPath, "JSON fit config");
    opts["preset"] =
        cmd->add_option("--preset", preset, "Named dataset preset")
            ->check(CLI::IsMember({"sim", "msr", "bt"}));
    opts["variant"] = cmd->add_option("--variant", variant, "Model variant")
                          ->check(CLI::IsMember({"np", "gauss"}));
    opts["seed"] = cmd->add_option("--seed", seed, "Clustering seed");
    opts["window"] = cmd->add_option("--window", window, "Window size n")
                         ->check(CLI::PositiveNumber);
    opts["stride"] = cmd->add_option("--stride", stride, "Window stride")
                         ->check(CLI::PositiveNumber);
    opts["states"] = cmd->add_option("--states", states, "Number of pure states")
                         ->check(CLI::PositiveNumber);
    opts["lambda-x"] = cmd->add_option("--lambda-x", lambdaX, "Latent path weight")
                           ->check(CLI::NonNegativeNumber);
    opts["lambda-q"] = cmd->add_option("--lambda-q", lambdaQ, "Pure state weight")
                           ->check(CLI::NonNegativeNumber);
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  // defaults < preset < config file < explicit flags
  FitConfig resolve(Manifest& m) const {
    json file = json::object();
    if (given("config")) file = parseJson(addInput(m, configPath), configPath);
    if (!file.is_object()) throw dataError(configPath + ": config must be an object");

    Variant v = Variant::Nonparametric;
    if (auto it = file.find("variant"); it != file.end() && it->is_string())
      v = variantFromString(it->get<std::string>());
    if (given("variant")) v = variantFromString(variant);

    std::string presetName = given("preset") ? preset : file.value("preset", "");
    FitConfig base;
    base.variant = v;
    if (!presetName.empty()) base = applyPreset(presetNamed(presetName), v, base);
    FitConfig c = fitConfigFromJson(file, base);
    c.variant = v;
    if (given("seed")) c.seed = seed;
    if (given("window")) c.windowSize = window;
    if (given("stride")) c.stride = stride;
    if (given("states")) c.numStates = states;
    if (given("lambda-x")) c.weights.lambdaX = lambdaX;
    if (given("lambda-q")) c.weights.lambdaQ = lambdaQ;
    c.validate();
    return c;
  }
};

std::vector<double> loadSeries(Manifest& m, const std::string& path) {
  return parseSeries(addInput(m, path), path);
}

// ---- fit

struct FitArgs {
  std::string series;
  std::string out;
  FitFlags flags;
};

void latentTable(const DwbModel& model, std::vector<std::string>& header,
                 std::vector<std::vector<std::string>>& rows) {
  header = {"window", "start", "center"};
  for (int k = 0; k < model.numStates(); ++k) header.push_back("x" + std::to_string(k + 1));
  for (Index i = 0; i < model.windowCount(); ++i) {
    const Index start = model.windowStarts[static_cast<std::size_t>(i)];
    std::vector<std::string> r{str(i), str(start),
                               str(static_cast<double>(start) +
                                   0.5 * static_cast<double>(model.windowSize() - 1))};
    for (int k = 0; k < model.numStates(); ++k) r.push_back(str(model.latent(k, i)));
    rows.push_back(std::move(r));
  }
}

int cmdFit(const FitArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "fit";
  const std::vector<double> series = loadSeries(m, a.series);
  const FitConfig cfg = a.flags.resolve(m);
  m.config = toJson(cfg);
  m.seed = cfg.seed;
  // Shape errors (window longer than the series) surface here, before fitting.
  const WindowedSeries windows = makeWindows(series, cfg);

  const DwbModel model = fit(windows, cfg);
  Output o(a.out, m);
  o.write("model.json", serializeModel(model));

  std::vector<std::vector<std::string>> trace;
  for (std::size_t i = 0; i < model.lossTrace.size(); ++i) {
    const auto& t = model.lossTrace[i];
    trace.push_back({str(i), str(t.dataFit), str(t.rxTerm), str(t.rqTerm), str(t.total)});
  }
  o.writeCsv("loss_trace.csv", {"iteration", "data_fit", "r_x", "r_q", "total"}, trace);

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  latentTable(model, header, rows);
  o.writeCsv("latent.csv", header, rows);

  out << "fit: " << toString(cfg.variant) << " K=" << model.numStates()
      << " n=" << model.windowSize() << " N=" << model.windowCount() << " iterations="
      << model.outerIterations << " objective=" << formatDouble(model.lossTrace.back().total)
      << "\n";
  o.finish();
  return kOk;
}

// ---- simulate

struct SimulateArgs {
  std::string spec;
  std::string preset;
  double rate = 200.0;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option* rateOpt = nullptr;
};

int cmdSimulate(const SimulateArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "simulate";
  m.seed = a.seed;
  json specDoc;
  if (!a.spec.empty()) {
    specDoc = parseJson(addInput(m, a.spec), a.spec);
  } else {
    specDoc = json{{"preset", a.preset.empty() ? "sim" : a.preset}};
  }
  if (a.rateOpt->count() > 0) {
    if (!specDoc.contains("preset"))
      throw dataError("--rate applies to presets; set sampling_rate in the spec");
    specDoc["sampling_rate"] = a.rate;
  }
  const GroundTruthSpec spec = groundTruthSpecFromJson(specDoc);
  m.config = toJson(spec);

  const SimulatedSeries sim = sampleSeries(spec, a.seed);
  Output o(a.out, m);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(sim.series.size());
  for (double y : sim.series) rows.push_back({str(y)});
  o.writeCsv("series.csv", {"y"}, rows);

  std::vector<std::string> header{"t", "time"};
  for (Index k = 0; k < sim.latentTruth.rows(); ++k)
    header.push_back("x" + std::to_string(k + 1));
  rows.clear();
  for (Index t = 0; t < sim.latentTruth.cols(); ++t) {
    std::vector<std::string> r{str(t), str(static_cast<double>(t + 1) / spec.samplingRate)};
    for (Index k = 0; k < sim.latentTruth.rows(); ++k) r.push_back(str(sim.latentTruth(k, t)));
    rows.push_back(std::move(r));
  }
  o.writeCsv("latent_truth.csv", header, rows);
  o.write("spec.json", toJson(spec).dump(2) + "\n");
  out << "simulate: T=" << sim.series.size() << " K=" << spec.pureStates.size() << "\n";
  o.finish();
  return kOk;
}

// ---- wae

struct WaeArgs {
  std::string configPath;
  std::string preset = "constant";
  std::vector<Index> lengths;
  std::vector<Index> windows;
  int trials = 10000;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option* trialsOpt = nullptr;
  CLI::Option* seedOpt = nullptr;
};

WaeConfig waePreset(const std::string& name) {
  WaeConfig c;
  if (name == "constant") return c;
  c.dynamic = true;
  c.windowSizes = {8, 16, 32, 64, 128, 256, 512, 1024};
  if (name == "dynamic") return c;
  if (name == "dynamic-close") {
    c.first = AnalyticDistribution::gaussianFromVariance(1, 4.23);
    c.second = AnalyticDistribution::gaussianFromVariance(9, 0.39);
    return c;
  }
  throw dataError("unknown wae preset '" + name + "'");
}

int cmdWae(const WaeArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "wae";
  json file = json::object();
  if (!a.configPath.empty()) file = parseJson(addInput(m, a.configPath), a.configPath);
  std::vector<std::string> problems;
  unknownKeys(file, {"preset", "first", "second", "dynamic", "lengths", "window_sizes",
                     "trials", "seed"},
              problems);
  if (!problems.empty()) throw dataError("wae config: " + join(problems, "; "));

  WaeConfig c = waePreset(file.value("preset", a.preset));
  std::vector<Index> lengths{c.length};
  try {
    if (file.contains("first")) c.first = distributionFromJson(file["first"]);
    if (file.contains("second")) c.second = distributionFromJson(file["second"]);
    if (file.contains("dynamic")) c.dynamic = file["dynamic"].get<bool>();
    if (file.contains("lengths")) lengths = file["lengths"].get<std::vector<Index>>();
    if (file.contains("window_sizes"))
      c.windowSizes = file["window_sizes"].get<std::vector<Index>>();
    if (file.contains("trials")) c.trials = file["trials"].get<int>();
    if (file.contains("seed")) c.seed = file["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw dataError(std::string("wae config: ") + e.what());
  }
  if (!a.lengths.empty()) lengths = a.lengths;
  if (!a.windows.empty()) c.windowSizes = a.windows;
  if (a.trialsOpt->count()) c.trials = a.trials;
  if (a.seedOpt->count()) c.seed = a.seed;

  m.seed = c.seed;
  m.config = json{{"first", toJson(c.first)},
                  {"second", toJson(c.second)},
                  {"dynamic", c.dynamic},
                  {"lengths", lengths},
                  {"window_sizes", c.windowSizes},
                  {"trials", c.trials}};

  std::vector<std::vector<std::string>> rows;
  for (Index T : lengths) {
    c.length = T;
    const auto table = waeExperiment(c);
    for (const auto& r : table)
      rows.push_back({str(T), str(r.windowSize), str(r.mean), str(r.q25), str(r.q75)});
    out << "wae: T=" << T << " argmin n=" << waeArgmin(table) << "\n";
  }
  Output o(a.out, m);
  o.writeCsv("wae.csv", {"T", "n", "mean", "q25", "q75"}, rows);
  o.finish();
  return kOk;
}

// ---- uniqueness

struct UniquenessArgs {
  std::string configPath;
  std::string preset = "appendix";
  std::vector<double> alphas;
  std::string out;
};

struct UniquenessProblem {
  Vector xB;
  Vector x0;
  Matrix q;
  std::vector<double> alphas;
};

UniquenessProblem uniquenessPreset(const std::string& name) {
  UniquenessProblem p;
  if (name == "appendix") {
    const Index n = 100;
    p.q.resize(n, 2);
    p.q.col(0) = quantileVectorOf(AnalyticDistribution::pointMass(0.0), n).values();
    p.q.col(1) = quantileVectorOf(AnalyticDistribution::uniform(0.0, 1.0), n).values();
    p.xB = Vector::Zero(2);
    p.xB << 1.0, 0.0;
    p.x0 = Vector::Constant(2, 0.5);
    return p;
  }
  if (name == "demo") {
    const Index n = 64;
    p.q.resize(n, 2);
    p.q.col(0) = quantileVectorOf(AnalyticDistribution::gaussian(-1.0, 1.0), n).values();
    p.q.col(1) = quantileVectorOf(AnalyticDistribution::gaussian(2.0, 0.5), n).values();
    p.xB.resize(2);
    p.xB << 0.3, 0.7;
    p.x0 = Vector::Constant(2, 0.5);
    return p;
  }
  throw dataError("unknown uniqueness preset '" + name + "' (expected appendix or demo)");
}

int cmdUniqueness(const UniquenessArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "uniqueness";
  UniquenessProblem p;
  if (!a.configPath.empty()) {
    const json file = parseJson(addInput(m, a.configPath), a.configPath);
    std::vector<std::string> problems;
    unknownKeys(file, {"preset", "x_b", "x_0", "pure_states", "states", "n", "alphas"},
                problems);
    if (!problems.empty()) throw dataError("uniqueness config: " + join(problems, "; "));
    try {
      if (file.contains("preset")) p = uniquenessPreset(file["preset"].get<std::string>());
      auto vec = [](const json& j) {
        const auto v = j.get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
      };
      if (file.contains("x_b")) p.xB = vec(file["x_b"]);
      if (file.contains("x_0")) p.x0 = vec(file["x_0"]);
      if (file.contains("pure_states")) p.q = matrixFromJson(file["pure_states"]);
      if (file.contains("states")) {
        const Index n = file.value("n", Index{100});
        const json& list = file["states"];
        p.q.resize(n, static_cast<Index>(list.size()));
        for (std::size_t k = 0; k < list.size(); ++k)
          p.q.col(static_cast<Index>(k)) =
              quantileVectorOf(distributionFromJson(list[k]), n).values();
      }
      if (file.contains("alphas")) p.alphas = file["alphas"].get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw dataError(std::string("uniqueness config: ") + e.what());
    }
  } else {
    p = uniquenessPreset(a.preset);
  }
  if (!a.alphas.empty()) p.alphas = a.alphas;
  for (Index k = 0; k < p.q.cols(); ++k) QuantileVector check(p.q.col(k));

  const SimplexWeight xB(p.xB), x0(p.x0);
  const AlphaRange range = alphaRange(xB, x0, p.q);
  const bool declined = !(range.alpha0 < range.alphaM);
  if (p.alphas.empty() && !declined) {
    const double hi = std::isfinite(range.alphaM) ? range.alphaM
                                                  : 4.0 * std::max(1.0, range.alpha0);
    for (int i = 0; i < 5; ++i) p.alphas.push_back(range.alpha0 + (hi - range.alpha0) * i / 4.0);
  }

  m.config = json{{"x_b", std::vector<double>(p.xB.begin(), p.xB.end())},
                  {"x_0", std::vector<double>(p.x0.begin(), p.x0.end())},
                  {"pure_states", matrixToJson(p.q)},
                  {"alphas", p.alphas}};

  const Vector target = p.q * p.xB;
  json constructions = json::array();
  std::vector<std::vector<std::string>> rows;
  for (double alpha : p.alphas) {
    json entry{{"alpha", alpha}};
    try {
      const InverseScaled s = inverseScaling(xB, x0, alpha, p.q);
      const double gap = (s.pureStates * s.weights.weights() - target).cwiseAbs().maxCoeff();
      entry["x_bar"] = std::vector<double>(s.weights.weights().begin(), s.weights.weights().end());
      entry["max_abs_barycenter_error"] = gap;
      for (Index j = 0; j < s.pureStates.rows(); ++j) {
        std::vector<std::string> r{str(alpha), str(j), str(quantileLevel(j, s.pureStates.rows()))};
        for (Index k = 0; k < s.pureStates.cols(); ++k) r.push_back(str(s.pureStates(j, k)));
        rows.push_back(std::move(r));
      }
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    constructions.push_back(std::move(entry));
  }

  const json report{{"alpha0", range.alpha0},
                    {"alpha_m", std::isfinite(range.alphaM) ? json(range.alphaM)
                                                            : json("inf")},
                    {"declined", declined},
                    {"reason", declined ? "feasible range is the single point alpha = 1; "
                                          "no distinct parameterization exists"
                                        : ""},
                    {"constructions", std::move(constructions)}};
  Output o(a.out, m);
  o.write("uniqueness.json", report.dump(2) + "\n");
  std::vector<std::string> header{"alpha", "j", "level"};
  for (Index k = 0; k < p.q.cols(); ++k) header.push_back("q" + std::to_string(k + 1));
  o.writeCsv("constructions.csv", header, rows);
  out << "uniqueness: alpha0=" << formatDouble(range.alpha0)
      << " alpha_m=" << formatDouble(range.alphaM)
      << (declined ? " (construction declined)" : "") << "\n";
  o.finish();
  return kOk;
}

// ---- lsurface

struct LsurfaceArgs {
  std::string series;
  std::string truth;
  std::vector<double> gridX;
  std::vector<double> gridQ;
  unsigned threads = 0;
  bool corner = false;
  std::string out;
  FitFlags flags;
};

std::vector<double> surfaceLadder() {
  std::vector<double> v;
  for (double decade = 1e-5; decade < 1.0; decade *= 10.0)
    for (double mult : {1.0, 2.0, 5.0}) v.push_back(mult * decade);
  v.push_back(1.0);
  return v;
}

int cmdLsurface(const LsurfaceArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "lsurface";
  const std::vector<double> series = loadSeries(m, a.series);
  const FitConfig cfg = a.flags.resolve(m);
  std::optional<GroundTruthSpec> truth;
  if (!a.truth.empty())
    truth = groundTruthSpecFromJson(parseJson(addInput(m, a.truth), a.truth));
  const std::vector<double> xs = a.gridX.empty() ? surfaceLadder() : a.gridX;
  const std::vector<double> qs = a.gridQ.empty() ? surfaceLadder() : a.gridQ;
  m.config = json{{"fit", toJson(cfg)}, {"grid_x", xs}, {"grid_q", qs}};
  m.seed = cfg.seed;

  const WindowedSeries windows = makeWindows(series, cfg);
  GridOptions opts;
  opts.threads = a.threads;
  if (truth) opts.truth = &*truth;
  const auto cells = lambdaGridSearch(windows, cfg, cartesianGrid(xs, qs), opts);
  const auto surface = lSurface(cells, windows.count(), cfg.numStates);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const GridCell& c = cells[i];
    const SurfacePoint& s = surface[i];
    auto opt = [](const std::optional<double>& v) { return v ? str(*v) : std::string(); };
    std::string error = c.error;
    std::replace(error.begin(), error.end(), ',', ';');
    rows.push_back({str(c.lambdaX), str(c.lambdaQ), c.ok ? "1" : "0",
                    str(c.terms.dataFit), str(c.terms.rxTerm), str(c.terms.rqTerm),
                    str(c.terms.total), str(s.logDataFit), str(s.logRx), str(s.logRq),
                    opt(c.eQ), opt(c.eX), error});
  }
  Output o(a.out, m);
  o.writeCsv("lsurface.csv",
             {"lambda_x", "lambda_q", "ok", "data_fit", "r_x", "r_q", "total",
              "log10_e_y", "log10_rx_per_n", "log10_rq_per_k", "e_q", "e_x", "error"},
             rows);
  if (truth) {
    const GridCell& best = cells[groundTruthArgmin(cells)];
    out << "lsurface: ground-truth argmin lambda_x=" << formatDouble(best.lambdaX)
        << " lambda_q=" << formatDouble(best.lambdaQ) << "\n";
  }
  if (a.corner) {
    const SurfacePoint& c = surface[maxCurvatureCorner(surface, xs.size(), qs.size())];
    out << "lsurface: max-curvature corner lambda_x=" << formatDouble(c.lambdaX)
        << " lambda_q=" << formatDouble(c.lambdaQ) << "\n";
  }
  out << "lsurface: " << cells.size() << " cells, "
      << std::count_if(cells.begin(), cells.end(), [](const GridCell& c) { return !c.ok; })
      << " failed\n";
  o.finish();
  return kOk;
}

// ---- eval

struct EvalArgs {
  std::string model;
  std::string series;
  std::string truth;
  Index mcSamples = 100000;
  std::uint64_t seed = 0;
  Index oracleGrid = 1000;
  std::string out;
};

int cmdEval(const EvalArgs& a, std::ostream& out) {
  Manifest m;
  m.command = "eval";
  m.seed = a.seed;
  const DwbModel model = modelFromJson(parseJson(addInput(m, a.model), a.model));
  const std::vector<double> series = loadSeries(m, a.series);
  json truthDoc;
  if (!a.truth.empty()) truthDoc = parseJson(addInput(m, a.truth), a.truth);
  m.config = json{{"mc_samples", a.mcSamples}, {"oracle_grid", a.oracleGrid}};

  const WindowedSeries windows = makeWindows(series, model.config);
  if (windows.starts != model.windowStarts)
    throw dataError("series windows do not match the model's window layout");

  EvalReport report;
  const DataFitReport fitReport = dataFitError(model, windows, a.mcSamples, a.seed);
  report.eY = fitReport.eY;
  report.eYMonteCarlo = fitReport.eYMonteCarlo;
  report.perWindowFit = fitReport.perWindow;

  json doc{{"e_y", report.eY},
           {"e_y_monte_carlo", report.eYMonteCarlo ? json(*report.eYMonteCarlo) : json(nullptr)},
           {"per_window_fit", std::vector<double>(report.perWindowFit.begin(),
                                                  report.perWindowFit.end())},
           {"e_q", nullptr},
           {"e_x", nullptr},
           {"permutation", nullptr}};
  if (!truthDoc.is_null()) {
    GroundTruthErrors errs;
    if (truthDoc.value("schema", "") == kModelSchema) {
      const DwbModel truthModel = modelFromJson(truthDoc);
      errs = groundTruthErrors(truthModel.pureStates, model.pureStates, truthModel.latent,
                               model.latent);
    } else {
      errs = groundTruthErrors(groundTruthSpecFromJson(truthDoc), model, a.oracleGrid);
    }
    report.eQ = errs.eQ;
    report.eX = errs.eX;
    report.permutation = errs.permutation;
    std::vector<int> oneBased;
    for (int p : errs.permutation) oneBased.push_back(p + 1);
    doc["e_q"] = errs.eQ;
    doc["e_x"] = errs.eX;
    doc["permutation"] = oneBased;
  }
  Output o(a.out, m);
  o.write("eval.json", doc.dump(2) + "\n");
  out << "eval: e_y=" << formatDouble(report.eY);
  if (report.eYMonteCarlo) out << " e_y(mc)=" << formatDouble(*report.eYMonteCarlo);
  if (!truthDoc.is_null())
    out << " e_q=" << formatDouble(report.eQ) << " e_x=" << formatDouble(report.eX);
  out << "\n";
  o.finish();
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic Wasserstein barycenter models for time series", "dwb"};
  app.require_subcommand(1);

  FitArgs fitArgs;
  auto* fitCmd = app.add_subcommand("fit", "Fit a model to a series");
  fitCmd->add_option("series", fitArgs.series, "Series CSV")->required();
  fitCmd->add_option("--out", fitArgs.out, "Output directory")->required();
  fitArgs.flags.attach(fitCmd);

  SimulateArgs simArgs;
  auto* simCmd = app.add_subcommand("simulate", "Sample a series from a ground truth");
  auto* specOpt = simCmd->add_option("--config,--spec", simArgs.spec, "Ground-truth spec JSON");
  simCmd->add_option("--preset", simArgs.preset, "Built-in spec")
      ->check(CLI::IsMember({"sim"}))
      ->excludes(specOpt);
  simArgs.rateOpt = simCmd->add_option("--rate", simArgs.rate, "Sampling rate (Hz)")
                        ->check(CLI::PositiveNumber);
  simCmd->add_option("--seed", simArgs.seed, "Sampling seed");
  simCmd->add_option("--out", simArgs.out, "Output directory")->required();

  WaeArgs waeArgs;
  auto* waeCmd = app.add_subcommand("wae", "Window approximation error experiment");
  waeCmd->add_option("--config", waeArgs.configPath, "JSON experiment config");
  waeCmd->add_option("--preset", waeArgs.preset, "Built-in experiment")
      ->check(CLI::IsMember({"constant", "dynamic", "dynamic-close"}));
  waeCmd->add_option("--length", waeArgs.lengths, "Series length(s) T")->delimiter(',');
  waeCmd->add_option("--window-sizes", waeArgs.windows, "Window sizes")->delimiter(',');
  waeArgs.trialsOpt = waeCmd->add_option("--trials", waeArgs.trials, "Trials per window size")
                          ->check(CLI::PositiveNumber);
  waeArgs.seedOpt = waeCmd->add_option("--seed", waeArgs.seed, "Seed");
  waeCmd->add_option("--out", waeArgs.out, "Output directory")->required();

  UniquenessArgs uniqArgs;
  auto* uniqCmd = app.add_subcommand("uniqueness", "Inverse-scaling construction report");
  auto* uniqConfig = uniqCmd->add_option("--config", uniqArgs.configPath, "JSON parameters");
  uniqCmd->add_option("--preset", uniqArgs.preset, "Built-in instance")
      ->check(CLI::IsMember({"appendix", "demo"}))
      ->excludes(uniqConfig);
  uniqCmd->add_option("--alpha", uniqArgs.alphas, "Scaling factor(s)")->delimiter(',');
  uniqCmd->add_option("--out", uniqArgs.out, "Output directory")->required();

  LsurfaceArgs lsArgs;
  auto* lsCmd = app.add_subcommand("lsurface", "Regularization grid and L-surface table");
  lsCmd->add_option("series", lsArgs.series, "Series CSV")->required();
  lsCmd->add_option("--out", lsArgs.out, "Output directory")->required();
  lsCmd->add_option("--grid-x", lsArgs.gridX, "lambda_x values")->delimiter(',');
  lsCmd->add_option("--grid-q", lsArgs.gridQ, "lambda_q values")->delimiter(',');
  lsCmd->add_option("--truth", lsArgs.truth, "Ground-truth spec JSON");
  lsCmd->add_option("--threads", lsArgs.threads, "Worker threads (0 = all cores)");
  lsCmd->add_flag("--corner", lsArgs.corner, "Report the max-curvature corner");
  lsArgs.flags.attach(lsCmd);

  EvalArgs evalArgs;
  auto* evalCmd = app.add_subcommand("eval", "Evaluate a fitted model");
  evalCmd->add_option("model", evalArgs.model, "Model JSON")->required();
  evalCmd->add_option("series", evalArgs.series, "Series CSV")->required();
  evalCmd->add_option("--truth", evalArgs.truth, "Ground-truth spec or model JSON");
  evalCmd->add_option("--mc-samples", evalArgs.mcSamples, "Monte-Carlo draws per window")
      ->check(CLI::NonNegativeNumber);
  evalCmd->add_option("--oracle-grid", evalArgs.oracleGrid, "Truth discretization")
      ->check(CLI::PositiveNumber);
  evalCmd->add_option("--seed", evalArgs.seed, "Monte-Carlo seed");
  evalCmd->add_option("--out", evalArgs.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*fitCmd) return cmdFit(fitArgs, out);
    if (*simCmd) return cmdSimulate(simArgs, out);
    if (*waeCmd) return cmdWae(waeArgs, out);
    if (*uniqCmd) return cmdUniqueness(uniqArgs, out);
    if (*lsCmd) return cmdLsurface(lsArgs, out);
    if (*evalCmd) return cmdEval(evalArgs, out);
  } catch (const Error& e) {
    err << "dwb " << command << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::Numerical ? kNumericalError : kDataError;
  } catch (const std::exception& e) {
    err << "dwb " << command << ": " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace dwb::cli
