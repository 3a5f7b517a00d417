#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "logloom/graph.hpp"
#include "logloom/parser.hpp"

namespace logloom {

// Flat "key = value" text with '#' comments.
class KeyValues {
 public:
  static KeyValues load(const std::filesystem::path& path);
  static KeyValues parse(const std::string& text, std::filesystem::path base_dir = {});

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Relative paths resolve against the file's directory.
  std::filesystem::path get_path(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_;
};

enum class LabelSource { kNone, kPerLine, kSession };

struct SyntheticSpec {
  int n_templates_normal = 8;
  int n_templates_anomalous = 4;
  int total_lines = 5000;
  double anomaly_rate = 0.03;
  int burst_min = 4;
  int burst_max = 12;
  double cycle_probability = 0.3;  // chance the chain follows its main cycle
  std::uint64_t seed = 7;

  void validate() const;
  // round(total_lines * anomaly_rate), halves away from zero.
  int anomaly_lines() const;
};

// Header descriptor used for generated lines.
inline constexpr const char* kSyntheticLogFormat =
    "<Date> <Time> <Pid> <Level> <Component>: <Content>";

struct DatasetManifest {
  std::string name;
  std::filesystem::path raw_path;
  std::string log_format = kSyntheticLogFormat;
  WindowSpec window;
  LabelSource label_source = LabelSource::kNone;
  std::filesystem::path label_path;
  std::uint64_t seed = 0;
  std::optional<SyntheticSpec> synthetic;  // set when no raw file is used

  static DatasetManifest from(const KeyValues& kv);
  static DatasetManifest load(const std::filesystem::path& path);
  void validate() const;
};

struct LoadedDataset {
  std::vector<RawLogRecord> records;
  std::vector<std::optional<int>> labels;  // aligned with records; empty if unlabeled
  std::size_t malformed = 0;
  std::size_t lines = 0;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

struct SyntheticCorpus {
  std::vector<std::string> lines;
  std::vector<int> labels;    // 1 = anomaly
  std::vector<int> skeleton;  // generating skeleton per line
  std::vector<std::string> skeletons;  // normal first, then anomalous
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Writes the corpus as a raw log plus a per-line label CSV (line_no,label).
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& raw,
                     const std::filesystem::path& labels);

}  // namespace logloom
