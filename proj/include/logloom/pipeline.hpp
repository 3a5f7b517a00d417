#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "logloom/autoencoder.hpp"
#include "logloom/clustering.hpp"
#include "logloom/datasets.hpp"
#include "logloom/parser.hpp"

namespace logloom {

enum class EncoderChoice { kBuiltin, kImport };
enum class MetricSpace { kEmbedding, kSpectral };

struct RunConfig {
  std::filesystem::path manifest_path;
  DatasetManifest manifest;
  std::filesystem::path out_dir = "logloom_out";
  std::uint64_t seed = 0;

  DrainConfig drain;
  EncoderChoice encoder = EncoderChoice::kBuiltin;
  int dimension = 64;
  std::filesystem::path vectors_path;  // import only

  int recurrence_radius = 10;
  TrainConfig train;
  SpectralConfig spectral;
  MetricSpace metric_space = MetricSpace::kEmbedding;
  double db_q = 2.0;
  std::size_t max_nodes = 20000;

  // Reads the run config; keys absent from it take the defaults above.
  // Window keys (window_mode, window_count, session_regex) override the
  // manifest's.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from(const KeyValues& kv);

  // Propagates `seed` into every stochastic stage.
  void set_seed(std::uint64_t s);
  void validate() const;
  nlohmann::json echo() const;
};

// Artifact file names inside RunConfig::out_dir.
namespace artifact {
inline constexpr const char* kRawLog = "raw.log";
inline constexpr const char* kRawLabels = "raw_labels.csv";
inline constexpr const char* kTemplates = "templates.tsv";
inline constexpr const char* kStructured = "structured.csv";
inline constexpr const char* kSessions = "sessions.csv";
inline constexpr const char* kVectors = "vectors.vec";
inline constexpr const char* kGraphs = "graphs.jsonl";
inline constexpr const char* kWeights = "weights.bin";
inline constexpr const char* kLossTrace = "loss.csv";
inline constexpr const char* kAssignment = "assignment.csv";
inline constexpr const char* kReport = "report.json";
}  // namespace artifact

// Each stage reads its upstream artifacts (DependencyError names the
// command that produces a missing one), writes its own, and records
// counts and wall time in <stage>.meta.json.
void cmd_parse(const RunConfig& cfg);
void cmd_encode(const RunConfig& cfg);
void cmd_graph(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_detect(const RunConfig& cfg);
nlohmann::json cmd_report(const RunConfig& cfg);
nlohmann::json run_all(const RunConfig& cfg);

}  // namespace logloom
