#include "logloom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "logloom/encoder.hpp"
#include "logloom/errors.hpp"
#include "logloom/graph.hpp"
#include "logloom/metrics.hpp"

namespace logloom {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path require_artifact(const RunConfig& cfg, const char* name, const char* producer) {
  fs::path p = cfg.out_dir / name;
  if (!fs::exists(p)) {
    throw DependencyError("missing " + p.string() + "; run `logloom " + producer +
                          "` first");
  }
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_meta(const RunConfig& cfg, const std::string& stage, json meta,
                const Stopwatch& clock) {
  meta["wall_seconds"] = clock.seconds();
  write_json(cfg.out_dir / (stage + ".meta.json"), meta);
}

const char* sigma_rule_name(SigmaRule r) {
  switch (r) {
    case SigmaRule::kSelfTuning: return "self_tuning";
    case SigmaRule::kKnnMedian: return "knn_median";
    case SigmaRule::kPairwiseMedian: return "pairwise_median";
  }
  return "?";
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<LogEvent> load_events(const RunConfig& cfg) {
  const auto rows = read_structured_csv(require_artifact(cfg, artifact::kStructured, "parse"));
  std::map<std::int64_t, std::string> keys;
  if (cfg.manifest.window.mode == WindowMode::kSession) {
    std::ifstream in(require_artifact(cfg, artifact::kSessions, "parse"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      keys[std::stoll(line.substr(0, comma))] = line.substr(comma + 1);
    }
  }
  std::vector<LogEvent> events;
  events.reserve(rows.size());
  for (const auto& r : rows) {
    LogEvent e{r.line_no, r.template_id, r.label, {}};
    if (auto it = keys.find(r.line_no); it != keys.end()) e.session_key = it->second;
    events.push_back(std::move(e));
  }
  return events;
}

GraphSet load_graphs(const RunConfig& cfg, VectorTable* vectors_out = nullptr) {
  const VectorTable vectors = import_vectors(require_artifact(cfg, artifact::kVectors, "encode"));
  GraphSet graphs = read_graphs(require_artifact(cfg, artifact::kGraphs, "graph"), vectors);
  if (vectors_out) *vectors_out = vectors;
  return graphs;
}

// Seeded window sampler: whole graphs, in shuffled order, while the node
// budget allows; kept graphs stay in graph_id order.
GraphSet sample_graphs(GraphSet graphs, std::size_t max_nodes, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& g : graphs) total += g.nodes.size();
  if (total <= max_nodes) return graphs;
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ 0x5a4d504c45ULL);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }
  std::vector<std::size_t> keep;
  std::size_t used = 0;
  for (auto i : order) {
    if (used + graphs[i].nodes.size() > max_nodes) continue;
    used += graphs[i].nodes.size();
    keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end());
  GraphSet out;
  for (auto i : keep) out.push_back(std::move(graphs[i]));
  return out;
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
  RunConfig cfg = from(KeyValues::load(path));
  return cfg;
}

RunConfig RunConfig::from(const KeyValues& kv) {
  RunConfig cfg;
  if (kv.has("manifest")) {
    cfg.manifest_path = kv.get_path("manifest");
    KeyValues mkv = KeyValues::load(cfg.manifest_path);
    for (const char* key : {"window_mode", "window_count", "session_regex"}) {
      if (kv.has(key)) mkv.set(key, kv.get(key, ""));
    }
    cfg.manifest = DatasetManifest::from(mkv);
  } else {
    cfg.manifest = DatasetManifest::from(kv);
  }
  if (kv.has("out")) cfg.out_dir = kv.get_path("out");

  cfg.drain.max_depth = static_cast<int>(kv.get_int("drain_depth", cfg.drain.max_depth));
  cfg.drain.similarity_threshold =
      kv.get_double("drain_similarity", cfg.drain.similarity_threshold);
  cfg.drain.max_children =
      static_cast<int>(kv.get_int("drain_max_children", cfg.drain.max_children));

  const std::string encoder = kv.get("encoder", "builtin");
  if (encoder == "builtin") {
    cfg.encoder = EncoderChoice::kBuiltin;
  } else if (encoder == "import") {
    cfg.encoder = EncoderChoice::kImport;
    cfg.vectors_path = kv.get_path("vectors_path");
  } else {
    throw ConfigError("encoder must be builtin or import");
  }
  cfg.dimension = static_cast<int>(kv.get_int("dim", cfg.dimension));
  cfg.recurrence_radius =
      static_cast<int>(kv.get_int("recurrence_radius", cfg.recurrence_radius));

  cfg.train.lambda = kv.get_double("lambda", cfg.train.lambda);
  cfg.train.learning_rate = kv.get_double("learning_rate", cfg.train.learning_rate);
  cfg.train.epochs = static_cast<int>(kv.get_int("epochs", cfg.train.epochs));
  cfg.train.hidden1 = static_cast<int>(kv.get_int("hidden1", cfg.train.hidden1));
  cfg.train.hidden2 = static_cast<int>(kv.get_int("hidden2", cfg.train.hidden2));

  cfg.spectral.K = static_cast<int>(kv.get_int("K", cfg.spectral.K));
  cfg.spectral.knn = static_cast<int>(kv.get_int("knn", cfg.spectral.knn));
  cfg.spectral.sigma = kv.get_double("sigma", cfg.spectral.sigma);
  const std::string rule = kv.get("sigma_rule", "self_tuning");
  if (rule == "self_tuning") {
    cfg.spectral.sigma_rule = SigmaRule::kSelfTuning;
  } else if (rule == "knn_median") {
    cfg.spectral.sigma_rule = SigmaRule::kKnnMedian;
  } else if (rule == "pairwise_median") {
    cfg.spectral.sigma_rule = SigmaRule::kPairwiseMedian;
  } else {
    throw ConfigError("sigma_rule must be self_tuning, knn_median or pairwise_median");
  }
  cfg.spectral.kmeans_restarts =
      static_cast<int>(kv.get_int("kmeans_restarts", cfg.spectral.kmeans_restarts));
  cfg.spectral.kmeans_iters =
      static_cast<int>(kv.get_int("kmeans_iters", cfg.spectral.kmeans_iters));
  cfg.spectral.dense_limit =
      static_cast<int>(kv.get_int("dense_limit", cfg.spectral.dense_limit));

  const std::string space = kv.get("metric_space", "embedding");
  if (space == "embedding") {
    cfg.metric_space = MetricSpace::kEmbedding;
  } else if (space == "spectral") {
    cfg.metric_space = MetricSpace::kSpectral;
  } else {
    throw ConfigError("metric_space must be embedding or spectral");
  }
  cfg.db_q = kv.get_double("db_q", cfg.db_q);
  const long long max_nodes = kv.get_int("max_nodes", static_cast<long long>(cfg.max_nodes));
  if (max_nodes < 2) throw ConfigError("max_nodes must be >= 2");
  cfg.max_nodes = static_cast<std::size_t>(max_nodes);

  cfg.set_seed(static_cast<std::uint64_t>(kv.get_int("seed", 0)));
  cfg.validate();
  return cfg;
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  spectral.seed = s;
}

void RunConfig::validate() const {
  drain.validate();
  manifest.validate();
  train.validate();
  spectral.validate();
  if (encoder == EncoderChoice::kBuiltin && dimension < 8) {
    throw ConfigError("builtin encoder needs dim >= 8");
  }
  if (recurrence_radius < 0) throw ConfigError("recurrence_radius must be >= 0");
  if (!(db_q >= 1.0)) throw ConfigError("db_q must be >= 1");
  if (spectral.K != 2) throw ConfigError("anomaly detection uses K = 2");
}

json RunConfig::echo() const {
  json j;
  j["manifest"] = manifest_path.string();
  j["dataset"] = manifest.name;
  j["dataset_seed"] = manifest.seed;
  j["seed"] = seed;
  j["drain"] = {{"max_depth", drain.max_depth},
                {"similarity_threshold", drain.similarity_threshold},
                {"max_children", drain.max_children}};
  j["encoder"] = encoder == EncoderChoice::kBuiltin ? "builtin" : "import";
  j["dim"] = dimension;
  j["window"] = {{"mode", manifest.window.mode == WindowMode::kCount ? "count" : "session"},
                 {"count", manifest.window.count},
                 {"session_regex", manifest.window.session_regex}};
  j["recurrence_radius"] = recurrence_radius;
  j["train"] = {{"lambda", train.lambda},
                {"learning_rate", train.learning_rate},
                {"epochs", train.epochs},
                {"hidden1", train.hidden1},
                {"hidden2", train.hidden2}};
  j["spectral"] = {{"K", spectral.K},
                   {"knn", spectral.knn},
                   {"sigma", spectral.sigma},
                   {"sigma_rule", sigma_rule_name(spectral.sigma_rule)},
                   {"kmeans_restarts", spectral.kmeans_restarts},
                   {"kmeans_iters", spectral.kmeans_iters},
                   {"dense_limit", spectral.dense_limit}};
  j["metric_space"] = metric_space == MetricSpace::kEmbedding ? "embedding" : "spectral";
  j["db_q"] = db_q;
  j["max_nodes"] = max_nodes;
  return j;
}

void cmd_parse(const RunConfig& cfg) {
  Stopwatch clock;
  fs::create_directories(cfg.out_dir);
  DatasetManifest manifest = cfg.manifest;
  if (manifest.synthetic) {
    const SyntheticCorpus corpus = generate_synthetic(*manifest.synthetic);
    manifest.raw_path = cfg.out_dir / artifact::kRawLog;
    manifest.label_path = cfg.out_dir / artifact::kRawLabels;
    write_synthetic(corpus, manifest.raw_path, manifest.label_path);
  }
  const LoadedDataset data = load_dataset(manifest);

  ParseTree tree(cfg.drain);
  std::vector<StructuredRow> rows;
  rows.reserve(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    StructuredRow r;
    r.line_no = data.records[i].line_no;
    r.template_id = parse(data.records[i], tree);
    if (!data.labels.empty()) r.label = data.labels[i];
    rows.push_back(r);
  }
  write_template_table(cfg.out_dir / artifact::kTemplates, tree.templates());
  write_structured_csv(cfg.out_dir / artifact::kStructured, rows);

  std::size_t unkeyed = 0;
  if (manifest.window.mode == WindowMode::kSession) {
    std::ofstream out(cfg.out_dir / artifact::kSessions, std::ios::binary);
    out << "line_no,session_key\n";
    for (const auto& rec : data.records) {
      const auto key = extract_session_key(rec.content, manifest.window.session_regex);
      if (key.empty()) ++unkeyed;
      out << rec.line_no << ',' << key << '\n';
    }
  }

  std::size_t labeled = 0;
  for (const auto& l : data.labels) labeled += l.has_value();
  write_meta(cfg, "parse",
             {{"lines", data.lines},
              {"records", data.records.size()},
              {"malformed", data.malformed},
              {"templates", tree.templates().size()},
              {"labeled_records", labeled},
              {"unkeyed_records", unkeyed}},
             clock);
}

void cmd_encode(const RunConfig& cfg) {
  Stopwatch clock;
  const auto templates = read_template_table(require_artifact(cfg, artifact::kTemplates, "parse"));
  const auto rows = read_structured_csv(require_artifact(cfg, artifact::kStructured, "parse"));
  std::vector<int> used;
  for (const auto& r : rows) used.push_back(r.template_id);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  VectorTable table;
  if (cfg.encoder == EncoderChoice::kBuiltin) {
    table = encode_all_builtin(templates, cfg.dimension);
  } else {
    const VectorTable imported = import_vectors(cfg.vectors_path);
    std::vector<int> known;
    for (const auto& t : templates) known.push_back(t.template_id);
    imported.require(known);
    table = VectorTable(imported.dimension(), VectorProvenance::kExternalImport);
    for (int id : used) table.insert({id, imported.at(id)});
  }
  table.require(used);
  write_vectors(cfg.out_dir / artifact::kVectors, table);
  write_meta(cfg, "encode",
             {{"templates", table.size()},
              {"dim", table.dimension()},
              {"provenance", cfg.encoder == EncoderChoice::kBuiltin ? "builtin-hash"
                                                                    : "external-import"}},
             clock);
}

void cmd_graph(const RunConfig& cfg) {
  Stopwatch clock;
  const auto events = load_events(cfg);
  const VectorTable vectors = import_vectors(require_artifact(cfg, artifact::kVectors, "encode"));
  const Partition parts = partition(events, cfg.manifest.window);
  const SequentialRecurrenceEdges edges(cfg.recurrence_radius);
  const GraphSet graphs = build_graphs(parts.windows, vectors, edges);
  write_graphs(cfg.out_dir / artifact::kGraphs, graphs);

  std::size_t nodes = 0, edge_count = 0;
  for (const auto& g : graphs) {
    nodes += g.nodes.size();
    edge_count += g.edge_count();
  }
  write_meta(cfg, "graph",
             {{"windows", graphs.size()},
              {"dropped_windows", parts.dropped_windows},
              {"dropped_records", parts.dropped_records},
              {"unkeyed_records", parts.unkeyed_records},
              {"nodes", nodes},
              {"edges", edge_count}},
             clock);
}

void cmd_train(const RunConfig& cfg) {
  Stopwatch clock;
  const GraphSet graphs = load_graphs(cfg);
  const TrainResult result = train(graphs, cfg.train);
  write_weights(cfg.out_dir / artifact::kWeights, result.weights);
  write_loss_trace(cfg.out_dir / artifact::kLossTrace, result.loss_trace);
  const double first = result.loss_trace.front();
  const double last = result.loss_trace.back();
  write_meta(cfg, "train",
             {{"epochs", result.loss_trace.size()},
              {"first_loss", first},
              {"final_loss", last},
              {"min_loss", *std::min_element(result.loss_trace.begin(), result.loss_trace.end())},
              {"relative_decrease", (first - last) / first}},
             clock);
}

void cmd_detect(const RunConfig& cfg) {
  Stopwatch clock;
  GraphSet graphs = load_graphs(cfg);
  const ModelWeights weights = read_weights(require_artifact(cfg, artifact::kWeights, "train"));
  std::size_t total_nodes = 0;
  for (const auto& g : graphs) total_nodes += g.nodes.size();
  graphs = sample_graphs(std::move(graphs), cfg.max_nodes, cfg.seed);

  const NodeEmbeddings emb = embed_all(graphs, weights);
  const SpectralResult result = spectral_cluster(emb.Z, emb.rows, cfg.spectral);
  const AnomalyLabels labels = label_anomalies(result.assignment);
  write_assignment_csv(cfg.out_dir / artifact::kAssignment, result.assignment, labels);

  std::vector<double> eigenvalues(result.embedding.values.data(),
                                  result.embedding.values.data() + result.embedding.values.size());
  write_meta(cfg, "detect",
             {{"nodes_total", total_nodes},
              {"nodes_clustered", emb.rows.size()},
              {"sampled", emb.rows.size() < total_nodes},
              {"cluster_sizes", result.assignment.sizes},
              {"abnormal_cluster", labels.abnormal_cluster},
              {"sigma", result.sigma},
              {"similarity_components", result.embedding.components},
              {"eigenvalues", eigenvalues}},
             clock);
}

json cmd_report(const RunConfig& cfg) {
  Stopwatch clock;
  const auto assignment =
      read_assignment_csv(require_artifact(cfg, artifact::kAssignment, "detect"));
  const GraphSet graphs = load_graphs(cfg);
  const ModelWeights weights = read_weights(require_artifact(cfg, artifact::kWeights, "train"));
  const NodeEmbeddings emb = embed_all(graphs, weights);

  std::map<std::pair<int, int>, Eigen::Index> where;
  for (std::size_t i = 0; i < emb.rows.size(); ++i) {
    where[{emb.rows[i].graph_id, emb.rows[i].node_index}] = static_cast<Eigen::Index>(i);
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(assignment.size()), emb.Z.cols());
  std::vector<int> clusters;
  std::vector<Verdict> verdicts;
  std::vector<std::optional<int>> truth;
  std::vector<NodeRef> refs;
  std::size_t abnormal = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto& a = assignment[i];
    auto it = where.find({a.graph_id, a.node_index});
    if (it == where.end()) {
      throw FormatError("assignment row for graph " + std::to_string(a.graph_id) +
                        " node " + std::to_string(a.node_index) + " has no embedding");
    }
    points.row(static_cast<Eigen::Index>(i)) = emb.Z.row(it->second);
    clusters.push_back(a.cluster);
    verdicts.push_back(a.verdict);
    truth.push_back(emb.rows[static_cast<std::size_t>(it->second)].label);
    refs.push_back(emb.rows[static_cast<std::size_t>(it->second)]);
    abnormal += a.verdict == Verdict::kAbnormal;
  }
  if (cfg.metric_space == MetricSpace::kSpectral) {
    const SimilarityMatrix sim = similarity(points, cfg.spectral);
    points = smallest_eigenvectors(laplacian(sim.S), cfg.spectral.K, cfg.spectral.dense_limit).rows;
  }

  json metrics;
  try {
    const MetricReport m = evaluate(points, clusters, cfg.db_q);
    metrics["silhouette"] = m.silhouette;
    metrics["davies_bouldin"] = m.davies_bouldin;
    // JSON has no infinity: zero within-cluster scatter is null plus a flag.
    metrics["calinski_harabasz"] = number_or_null(m.calinski_harabasz);
    metrics["calinski_harabasz_infinite"] = std::isinf(m.calinski_harabasz);
    metrics["log_calinski_harabasz"] = number_or_null(m.log_calinski_harabasz);
  } catch (const MetricUndefined& e) {
    metrics["error"] = e.what();
  }
  const AccuracyResult acc = accuracy(verdicts, truth);
  metrics["accuracy"] = acc.evaluated ? json(acc.accuracy) : json(nullptr);
  metrics["labeled_nodes"] = acc.evaluated;
  metrics["unlabeled_nodes"] = acc.skipped;
  metrics["space"] = cfg.metric_space == MetricSpace::kEmbedding ? "embedding" : "spectral";

  const json parse_meta = read_json(cfg.out_dir / "parse.meta.json");
  const json encode_meta = read_json(cfg.out_dir / "encode.meta.json");
  const json graph_meta = read_json(cfg.out_dir / "graph.meta.json");
  const json train_meta = read_json(cfg.out_dir / "train.meta.json");
  const json detect_meta = read_json(cfg.out_dir / "detect.meta.json");
  const auto trace = read_loss_trace(require_artifact(cfg, artifact::kLossTrace, "train"));

  std::size_t planted = 0;
  for (const auto& t : truth) planted += t.value_or(0) != 0;

  json report;
  report["dataset"] = cfg.manifest.name;
  report["counts"] = {{"lines", parse_meta.value("lines", 0)},
                      {"malformed", parse_meta.value("malformed", 0)},
                      {"templates", parse_meta.value("templates", 0)},
                      {"windows", graphs.size()},
                      {"dropped_windows", graph_meta.value("dropped_windows", 0)},
                      {"nodes", emb.rows.size()},
                      {"edges", graph_meta.value("edges", 0)}};
  report["loss"] = {{"epochs", trace.size()},
                    {"first", trace.empty() ? json(nullptr) : json(trace.front())},
                    {"final", trace.empty() ? json(nullptr) : json(trace.back())},
                    {"relative_decrease", train_meta.value("relative_decrease", 0.0)}};
  const double clustered = static_cast<double>(assignment.size());
  report["clusters"] = {{"sizes", detect_meta.value("cluster_sizes", json::array())},
                        {"abnormal_cluster", detect_meta.value("abnormal_cluster", 1)},
                        {"abnormal_nodes", abnormal},
                        {"abnormal_fraction", clustered > 0 ? abnormal / clustered : 0.0},
                        {"labeled_anomalies", planted},
                        {"nodes_clustered", assignment.size()},
                        {"sampled", detect_meta.value("sampled", false)},
                        {"sigma", detect_meta.value("sigma", 0.0)},
                        {"similarity_components",
                         detect_meta.value("similarity_components", 0)}};
  report["metrics"] = metrics;
  report["wall_times"] = {{"parse", parse_meta.value("wall_seconds", 0.0)},
                          {"encode", encode_meta.value("wall_seconds", 0.0)},
                          {"graph", graph_meta.value("wall_seconds", 0.0)},
                          {"train", train_meta.value("wall_seconds", 0.0)},
                          {"detect", detect_meta.value("wall_seconds", 0.0)},
                          {"report", clock.seconds()}};
  report["config"] = cfg.echo();
  write_json(cfg.out_dir / artifact::kReport, report);
  return report;
}

json run_all(const RunConfig& cfg) {
  cmd_parse(cfg);
  cmd_encode(cfg);
  cmd_graph(cfg);
  cmd_train(cfg);
  cmd_detect(cfg);
  return cmd_report(cfg);
}

}  // namespace logloom
