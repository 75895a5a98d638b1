#pragma once

// Command-line front end and its file formats.
//
// Series files are single-column CSV with an optional header; lines starting
// with '#' are comments. Configs, ground-truth specs and models are JSON
// documents with a "schema" tag.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dwb/ot_core.hpp"
#include "dwb/simulate.hpp"

namespace dwb::cli {

inline constexpr const char* kSpecSchema = "dwb-spec/1";
inline constexpr const char* kManifestSchema = "dwb-manifest/1";

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericalError = 4 };

/// Parses a series; `source` names the input in error messages, which also
/// carry the 1-based line number.
std::vector<double> parseSeries(std::string_view text, const std::string& source);
std::vector<double> readSeriesFile(const std::filesystem::path& path);

std::string readTextFile(const std::filesystem::path& path);
/// JSON parse errors are reported with the line number.
nlohmann::json parseJson(std::string_view text, const std::string& source);
nlohmann::json readJsonFile(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory and a rename.
void writeFileAtomic(const std::filesystem::path& path, std::string_view content);

std::string sha256Hex(std::string_view data);

/// Shortest round-trip decimal form.
std::string formatDouble(double v);

nlohmann::json toJson(const AnalyticDistribution& dist);
AnalyticDistribution distributionFromJson(const nlohmann::json& j);

nlohmann::json toJson(const GroundTruthSpec& spec);
/// Accepts a full spec or {"preset": "sim", "sampling_rate": r}. All invalid
/// fields are reported together.
GroundTruthSpec groundTruthSpecFromJson(const nlohmann::json& j);

/// Runs one command. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dwb::cli
