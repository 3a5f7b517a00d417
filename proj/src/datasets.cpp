#include "logloom/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<int> parse_label(const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "1" || v == "anomaly" || v == "abnormal") return 1;
  if (v == "0" || v == "normal") return 0;
  return std::nullopt;
}

// Normal skeletons share block vocabulary. Anomalous ones share an error
// trailer and nothing with the normal ones.
// {N} number, {B} block id digits, {IP} address with port.
constexpr std::array<const char*, 12> kNormalSkeletons = {
    "Receiving block blk_{B} src: {IP} dest: {IP}",
    "PacketResponder {N} for block blk_{B} terminating",
    "Received block blk_{B} of size {N} from {IP}",
    "BLOCK* NameSystem.addStoredBlock: blockMap updated: {IP} is added to blk_{B} size {N}",
    "BLOCK* NameSystem.allocateBlock: block blk_{B} for replica {N}",
    "Verification succeeded for block blk_{B}",
    "Served block blk_{B} to {IP}",
    "Deleting block blk_{B} file replica {N}",
    "Starting thread to transfer block blk_{B} to {IP}",
    "Transmitted block blk_{B} to {IP}",
    "Adding an already existing block blk_{B}",
    "Reopen block blk_{B} for replica {N}",
};

constexpr std::array<const char*, 8> kAnomalousSkeletons = {
    "Exception in receiveBlock stream interrupted after {N} retries - DataXceiver error: aborting operation",
    "IOException: Connection reset by peer {IP} - DataXceiver error: aborting operation",
    "Timeout waiting on socket channel {IP} elapsed {N} ms - DataXceiver error: aborting operation",
    "Corrupt checksum detected offset {N} expected {N} - DataXceiver error: aborting operation",
    "Failed unrecoverable write pipeline error code {N} - DataXceiver error: aborting operation",
    "Fatal panic: heap overflow at {N} - DataXceiver error: aborting operation",
    "Refused connection attempt {N} denied by peer - DataXceiver error: aborting operation",
    "Aborting recovery checkpoint mismatch generation {N} - DataXceiver error: aborting operation",
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [lo, hi].
  long long between(long long lo, long long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<long long>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

std::string fill_skeleton(const std::string& skeleton, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < skeleton.size()) {
    if (skeleton.compare(i, 3, "{N}") == 0) {
      out += std::to_string(rng.between(0, 99999));
      i += 3;
    } else if (skeleton.compare(i, 3, "{B}") == 0) {
      if (rng.uniform() < 0.5) out += '-';
      out += std::to_string(rng.between(1'000'000'000'000'000LL, 9'000'000'000'000'000'000LL));
      i += 3;
    } else if (skeleton.compare(i, 4, "{IP}") == 0) {
      out += "/10.251." + std::to_string(rng.between(0, 255)) + "." +
             std::to_string(rng.between(0, 255)) + ":" +
             std::to_string(rng.between(1024, 65535));
      i += 4;
    } else {
      out += skeleton[i++];
    }
  }
  return out;
}

std::string header_for(std::size_t index, bool anomalous, Rng& rng) {
  const long long seconds = (20 * 3600 + 35 * 60 + static_cast<long long>(index)) % 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "081109 %02lld%02lld%02lld %lld %s dfs.DataNode:",
                seconds / 3600, (seconds / 60) % 60, seconds % 60, rng.between(100, 9999),
                anomalous ? "WARN" : "INFO");
  return buf;
}

}  // namespace

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

KeyValues KeyValues::parse(const std::string& text, std::filesystem::path base_dir) {
  KeyValues kv;
  kv.base_dir_ = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(row) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(row) + ": empty key");
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValues::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not an integer: " + it->second);
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not a number: " + it->second);
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = lower(it->second);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' is not a boolean: " + it->second);
}

std::filesystem::path KeyValues::get_path(const std::string& key) const {
  std::filesystem::path p(require(key));
  return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
}

void SyntheticSpec::validate() const {
  if (n_templates_normal < 1 ||
      n_templates_normal > static_cast<int>(kNormalSkeletons.size())) {
    throw ConfigError("n_templates_normal must lie in [1, " +
                      std::to_string(kNormalSkeletons.size()) + "]");
  }
  if (n_templates_anomalous < 1 ||
      n_templates_anomalous > static_cast<int>(kAnomalousSkeletons.size())) {
    throw ConfigError("n_templates_anomalous must lie in [1, " +
                      std::to_string(kAnomalousSkeletons.size()) + "]");
  }
  if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) {
    throw ConfigError("anomaly_rate must lie in (0, 0.5)");
  }
  if (total_lines < 2) throw ConfigError("total_lines must be >= 2");
  if (burst_min < 1 || burst_max < burst_min) throw ConfigError("bad burst length range");
  if (!(cycle_probability >= 0.0 && cycle_probability <= 1.0)) {
    throw ConfigError("cycle_probability must lie in [0, 1]");
  }
  if (anomaly_lines() < 1) throw ConfigError("anomaly_rate yields no anomalous lines");
}

int SyntheticSpec::anomaly_lines() const {
  return static_cast<int>(std::llround(static_cast<double>(total_lines) * anomaly_rate));
}

DatasetManifest DatasetManifest::from(const KeyValues& kv) {
  DatasetManifest m;
  m.name = kv.get("name", "dataset");
  m.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  m.log_format = kv.get("log_format", kSyntheticLogFormat);

  const std::string mode = kv.get("window_mode", "count");
  if (mode == "count") {
    m.window.mode = WindowMode::kCount;
  } else if (mode == "session") {
    m.window.mode = WindowMode::kSession;
  } else {
    throw ConfigError("window_mode must be count or session");
  }
  m.window.count = static_cast<int>(kv.get_int("window_count", 100));
  m.window.session_regex = kv.get("session_regex", m.window.session_regex);

  const std::string source = kv.get("source", kv.has("raw_path") ? "file" : "synthetic");
  if (source == "synthetic") {
    SyntheticSpec s;
    s.n_templates_normal = static_cast<int>(kv.get_int("synthetic_normal_templates", s.n_templates_normal));
    s.n_templates_anomalous =
        static_cast<int>(kv.get_int("synthetic_anomalous_templates", s.n_templates_anomalous));
    s.total_lines = static_cast<int>(kv.get_int("synthetic_total_lines", s.total_lines));
    s.anomaly_rate = kv.get_double("synthetic_anomaly_rate", s.anomaly_rate);
    s.burst_min = static_cast<int>(kv.get_int("synthetic_burst_min", s.burst_min));
    s.burst_max = static_cast<int>(kv.get_int("synthetic_burst_max", s.burst_max));
    s.cycle_probability = kv.get_double("synthetic_cycle_probability", s.cycle_probability);
    s.seed = m.seed;
    m.synthetic = s;
    m.label_source = LabelSource::kPerLine;
    m.log_format = kSyntheticLogFormat;
  } else if (source == "file") {
    m.raw_path = kv.get_path("raw_path");
    const std::string labels = kv.get("label_source", "none");
    if (labels == "none") {
      m.label_source = LabelSource::kNone;
    } else if (labels == "per_line") {
      m.label_source = LabelSource::kPerLine;
      m.label_path = kv.get_path("label_path");
    } else if (labels == "session") {
      m.label_source = LabelSource::kSession;
      m.label_path = kv.get_path("label_path");
    } else {
      throw ConfigError("label_source must be none, per_line or session");
    }
  } else {
    throw ConfigError("source must be file or synthetic");
  }
  m.validate();
  return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  return from(KeyValues::load(path));
}

void DatasetManifest::validate() const {
  window.validate();
  HeaderFormat probe(log_format);
  if (synthetic) {
    synthetic->validate();
    return;
  }
  if (!std::filesystem::exists(raw_path)) {
    throw IoError("raw log not found: " + raw_path.string());
  }
  if (label_source != LabelSource::kNone && !std::filesystem::exists(label_path)) {
    throw IoError("label file not found: " + label_path.string());
  }
  if (label_source == LabelSource::kSession && window.mode != WindowMode::kSession &&
      window.session_regex.empty()) {
    throw ConfigError("session labels need a session_regex");
  }
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
  std::ifstream in(manifest.raw_path);
  if (!in) throw IoError("cannot read " + manifest.raw_path.string());
  const HeaderFormat format(manifest.log_format);

  LoadedDataset out;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    if (auto record = format.split(line, line_no)) {
      out.records.push_back(std::move(*record));
    } else {
      ++out.malformed;
    }
    ++line_no;
  }
  out.lines = static_cast<std::size_t>(line_no);
  if (manifest.label_source == LabelSource::kNone) return out;

  std::ifstream lab(manifest.label_path);
  if (!lab) throw IoError("cannot read " + manifest.label_path.string());
  std::getline(lab, line);  // header
  out.labels.assign(out.records.size(), std::nullopt);

  if (manifest.label_source == LabelSource::kPerLine) {
    std::unordered_map<std::int64_t, int> by_line;
    std::int64_t previous = -1;
    while (std::getline(lab, line)) {
      if (trim(line).empty()) continue;
      const auto comma = line.find(',');
      std::int64_t at = -1;
      try {
        at = std::stoll(line.substr(0, comma));
      } catch (const std::exception&) {
        throw LabelError("unreadable label row '" + line + "'", previous + 1);
      }
      if (at <= previous || at >= line_no) {
        throw LabelError("label row for line " + std::to_string(at) +
                             " is out of order or beyond the log",
                         at);
      }
      auto value = comma == std::string::npos ? std::nullopt
                                              : parse_label(line.substr(comma + 1));
      if (!value) throw LabelError("bad label value in row '" + line + "'", at);
      by_line[at] = *value;
      previous = at;
    }
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      auto it = by_line.find(out.records[i].line_no);
      if (it != by_line.end()) out.labels[i] = it->second;
    }
  } else {
    std::unordered_map<std::string, int> by_key;
    while (std::getline(lab, line)) {
      if (trim(line).empty()) continue;
      const auto comma = line.find(',');
      auto value = comma == std::string::npos ? std::nullopt
                                              : parse_label(line.substr(comma + 1));
      if (!value) throw LabelError("bad session label row '" + line + "'", -1);
      by_key[trim(line.substr(0, comma))] = *value;
    }
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      const auto key =
          extract_session_key(out.records[i].content, manifest.window.session_regex);
      auto it = by_key.find(key);
      if (!key.empty() && it != by_key.end()) out.labels[i] = it->second;
    }
  }
  return out;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus corpus;
  const int normal_kinds = spec.n_templates_normal;
  const int anomalous_kinds = spec.n_templates_anomalous;
  for (int i = 0; i < normal_kinds; ++i) corpus.skeletons.emplace_back(kNormalSkeletons[static_cast<std::size_t>(i)]);
  for (int i = 0; i < anomalous_kinds; ++i) corpus.skeletons.emplace_back(kAnomalousSkeletons[static_cast<std::size_t>(i)]);

  const int anomalous = spec.anomaly_lines();
  const int normal = spec.total_lines - anomalous;

  std::vector<int> bursts;
  for (int left = anomalous; left > 0;) {
    const int len = std::min<int>(left, static_cast<int>(rng.between(spec.burst_min, spec.burst_max)));
    bursts.push_back(len);
    left -= len;
  }
  // Each burst goes into a distinct gap between normal lines.
  std::vector<int> gaps(static_cast<std::size_t>(normal + 1));
  for (int i = 0; i <= normal; ++i) gaps[static_cast<std::size_t>(i)] = i;
  if (bursts.size() > gaps.size()) throw ConfigError("too many bursts for the normal lines");
  for (std::size_t i = 0; i < bursts.size(); ++i) {
    const auto j = static_cast<std::size_t>(rng.between(static_cast<long long>(i),
                                                        static_cast<long long>(gaps.size() - 1)));
    std::swap(gaps[i], gaps[j]);
  }
  std::vector<int> burst_at(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(bursts.size()));
  std::sort(burst_at.begin(), burst_at.end());

  auto emit = [&](int skeleton, bool is_anomaly) {
    std::string content = fill_skeleton(corpus.skeletons[static_cast<std::size_t>(skeleton)], rng);
    corpus.lines.push_back(header_for(corpus.lines.size(), is_anomaly, rng) + " " + content);
    corpus.labels.push_back(is_anomaly ? 1 : 0);
    corpus.skeleton.push_back(skeleton);
  };

  int state = static_cast<int>(rng.between(0, normal_kinds - 1));
  std::size_t next_burst = 0;
  for (int i = 0; i <= normal; ++i) {
    while (next_burst < bursts.size() && burst_at[next_burst] == i) {
      for (int b = 0; b < bursts[next_burst]; ++b) {
        emit(normal_kinds + static_cast<int>(rng.between(0, anomalous_kinds - 1)), true);
      }
      ++next_burst;
    }
    if (i == normal) break;
    emit(state, false);
    state = rng.uniform() < spec.cycle_probability
                ? (state + 1) % normal_kinds
                : static_cast<int>(rng.between(0, normal_kinds - 1));
  }
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& raw,
                     const std::filesystem::path& labels) {
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw IoError("cannot write " + raw.string());
  for (const auto& l : corpus.lines) out << l << '\n';
  std::ofstream lab(labels, std::ios::binary);
  if (!lab) throw IoError("cannot write " + labels.string());
  lab << "line_no,label\n";
  for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
    lab << i << ',' << corpus.labels[i] << '\n';
  }
}

}  // namespace logloom
