#include "logloom/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>

#include <json.hpp>

#include "logloom/errors.hpp"

namespace logloom {

void WindowSpec::validate() const {
  if (mode == WindowMode::kCount && count < 2) {
    throw ConfigError("window count must be >= 2");
  }
  if (mode == WindowMode::kSession) {
    if (session_regex.empty()) throw ConfigError("session mode needs a session regex");
    try {
      std::regex probe(session_regex);
    } catch (const std::regex_error& e) {
      throw ConfigError("bad session regex: " + std::string(e.what()));
    }
  }
}

std::string extract_session_key(const std::string& content,
                                const std::string& session_regex) {
  static thread_local std::string cached_source;
  static thread_local std::regex cached;
  if (cached_source != session_regex) {
    cached = std::regex(session_regex);
    cached_source = session_regex;
  }
  std::smatch m;
  if (std::regex_search(content, m, cached)) return m[0].str();
  return {};
}

Partition partition(const std::vector<LogEvent>& stream, const WindowSpec& spec) {
  spec.validate();
  Partition out;
  auto keep = [&out](Window w) {
    if (w.events.size() >= 2) {
      out.windows.push_back(std::move(w));
    } else {
      ++out.dropped_windows;
      out.dropped_records += w.events.size();
    }
  };

  if (spec.mode == WindowMode::kCount) {
    const auto step = static_cast<std::size_t>(spec.count);
    for (std::size_t start = 0; start < stream.size(); start += step) {
      Window w;
      w.key = std::to_string(out.windows.size() + out.dropped_windows);
      auto end = std::min(stream.size(), start + step);
      w.events.assign(stream.begin() + static_cast<std::ptrdiff_t>(start),
                      stream.begin() + static_cast<std::ptrdiff_t>(end));
      keep(std::move(w));
    }
    return out;
  }

  // Session mode: group by key, order groups by first appearance.
  std::map<std::string, std::size_t> slot;
  std::vector<Window> groups;
  for (const auto& e : stream) {
    std::string key = e.session_key;
    if (key.empty()) {
      key = kUnkeyedSession;
      ++out.unkeyed_records;
    }
    auto [it, inserted] = slot.try_emplace(key, groups.size());
    if (inserted) groups.push_back(Window{key, {}});
    groups[it->second].events.push_back(e);
  }
  for (auto& g : groups) keep(std::move(g));
  return out;
}

std::size_t WindowGraph::edge_count() const {
  std::size_t edges = 0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < A.cols(); ++j) {
      if (A(i, j) != 0.0) ++edges;
    }
  }
  return edges;
}

Eigen::MatrixXd SequentialRecurrenceEdges::weights(
    const std::vector<int>& template_ids) const {
  const auto n = static_cast<Eigen::Index>(template_ids.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    w(i, i + 1) += 1.0;
    w(i + 1, i) += 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index last = std::min<Eigen::Index>(n - 1, i + radius_);
    for (Eigen::Index j = i + 1; j <= last; ++j) {
      if (template_ids[static_cast<std::size_t>(i)] ==
          template_ids[static_cast<std::size_t>(j)]) {
        const double gap = static_cast<double>(j - i);
        w(i, j) += 1.0 / gap;
        w(j, i) += 1.0 / gap;
      }
    }
  }
  return w;
}

WindowGraph build_graph(const Window& window, const VectorTable& vectors,
                        const EdgeStrategy& edges, int graph_id) {
  if (window.events.size() < 2) {
    throw ContractViolation("window '" + window.key + "' has fewer than 2 records");
  }
  WindowGraph g;
  g.graph_id = graph_id;
  const auto n = static_cast<Eigen::Index>(window.events.size());
  g.X.resize(n, vectors.dimension());
  std::vector<int> ids;
  ids.reserve(window.events.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = window.events[static_cast<std::size_t>(i)];
    g.nodes.push_back({static_cast<int>(i), e.line_no, e.template_id, e.label});
    g.X.row(i) = vectors.at(e.template_id).transpose();
    ids.push_back(e.template_id);
  }
  g.Wg = edges.weights(ids);
  g.Wg.diagonal().setZero();
  g.A = (g.Wg.array() > 0.0).cast<double>().matrix();
  return g;
}

GraphSet build_graphs(const std::vector<Window>& windows,
                      const VectorTable& vectors, const EdgeStrategy& edges) {
  GraphSet graphs;
  graphs.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    graphs.push_back(build_graph(windows[i], vectors, edges, static_cast<int>(i)));
  }
  return graphs;
}

void write_graphs(const std::filesystem::path& path, const GraphSet& graphs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& g : graphs) {
    nlohmann::json j;
    j["graph_id"] = g.graph_id;
    j["dim"] = g.X.cols();
    auto nodes = nlohmann::json::array();
    for (const auto& n : g.nodes) {
      auto row = nlohmann::json::array({n.node_index, n.line_no, n.template_id});
      if (n.label) row.push_back(*n.label);
      nodes.push_back(std::move(row));
    }
    j["nodes"] = std::move(nodes);
    auto edge_list = nlohmann::json::array();
    for (Eigen::Index a = 0; a < g.Wg.rows(); ++a) {
      for (Eigen::Index b = a + 1; b < g.Wg.cols(); ++b) {
        if (g.A(a, b) != 0.0) edge_list.push_back({a, b, g.Wg(a, b)});
      }
    }
    j["edges"] = std::move(edge_list);
    out << j.dump() << '\n';
  }
}

GraphSet read_graphs(const std::filesystem::path& path, const VectorTable& vectors) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  GraphSet graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    WindowGraph g;
    g.graph_id = j.at("graph_id").get<int>();
    const int dim = j.at("dim").get<int>();
    if (dim != vectors.dimension()) {
      throw FormatError("graph " + std::to_string(g.graph_id) + " was built with D=" +
                        std::to_string(dim) + " but vectors have D=" +
                        std::to_string(vectors.dimension()));
    }
    for (const auto& row : j.at("nodes")) {
      GraphNode n;
      n.node_index = row.at(0).get<int>();
      n.line_no = row.at(1).get<std::int64_t>();
      n.template_id = row.at(2).get<int>();
      if (row.size() > 3) n.label = row.at(3).get<int>();
      g.nodes.push_back(n);
    }
    const auto n = g.size();
    g.X.resize(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      g.X.row(i) = vectors.at(g.nodes[static_cast<std::size_t>(i)].template_id).transpose();
    }
    g.A = Eigen::MatrixXd::Zero(n, n);
    g.Wg = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : j.at("edges")) {
      const auto a = e.at(0).get<Eigen::Index>();
      const auto b = e.at(1).get<Eigen::Index>();
      const double w = e.at(2).get<double>();
      if (a < 0 || b < 0 || a >= n || b >= n || a == b || !(w > 0.0)) {
        throw FormatError("graph " + std::to_string(g.graph_id) + ": bad edge");
      }
      g.A(a, b) = g.A(b, a) = 1.0;
      g.Wg(a, b) = g.Wg(b, a) = w;
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace logloom
