#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "logloom/encoder.hpp"
#include "logloom/errors.hpp"
#include "logloom/graph.hpp"

using namespace logloom;

namespace {

VectorTable unit_vectors(int templates, int D = 8) {
  VectorTable t(D, VectorProvenance::kBuiltinHash);
  for (int id = 0; id < templates; ++id) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(D);
    v[id % D] = 1.0;
    t.insert({id, v});
  }
  return t;
}

std::vector<LogEvent> stream_of(const std::vector<int>& tids) {
  std::vector<LogEvent> out;
  for (std::size_t i = 0; i < tids.size(); ++i) {
    out.push_back({static_cast<std::int64_t>(i), tids[i], std::nullopt, ""});
  }
  return out;
}

Window window_of(const std::vector<int>& tids) { return Window{"w", stream_of(tids)}; }

// Oracle: apply each rule to every pair independently.
Eigen::MatrixXd brute_force_weights(const std::vector<int>& tids, int r) {
  const auto n = static_cast<Eigen::Index>(tids.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::Index gap = std::abs(i - j);
      double v = 0.0;
      if (gap == 1) v += 1.0;
      if (gap <= r && tids[static_cast<std::size_t>(i)] == tids[static_cast<std::size_t>(j)]) {
        v += 1.0 / static_cast<double>(gap);
      }
      w(i, j) = v;
    }
  }
  return w;
}

}  // namespace

TEST_CASE("two records with distinct templates") {
  const auto g = build_graph(window_of({0, 1}), unit_vectors(2), SequentialRecurrenceEdges());
  Eigen::Matrix2d expect;
  expect << 0, 1, 1, 0;
  CHECK(g.A == expect);
  CHECK(g.Wg == expect);
  CHECK(g.edge_count() == 1);
}

TEST_CASE("templates (t1, t2, t1) add a half-weight recurrence edge") {
  const auto g = build_graph(window_of({1, 2, 1}), unit_vectors(3), SequentialRecurrenceEdges(10));
  CHECK(g.Wg(0, 1) == 1.0);
  CHECK(g.Wg(1, 2) == 1.0);
  CHECK(g.Wg(0, 2) == 0.5);
  CHECK(g.A(0, 2) == 1.0);
  CHECK(g.Wg == brute_force_weights({1, 2, 1}, 10));
}

TEST_CASE("adjacent repeats add both rules") {
  const auto g = build_graph(window_of({4, 4}), unit_vectors(5), SequentialRecurrenceEdges());
  CHECK(g.Wg(0, 1) == 2.0);
  CHECK(g.A(0, 1) == 1.0);
}

TEST_CASE("edge rules match the brute-force oracle on random windows") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 120);
    const int r = static_cast<int>(rng() % 15);
    std::vector<int> tids;
    for (int i = 0; i < n; ++i) tids.push_back(static_cast<int>(rng() % 6));
    const auto g = build_graph(window_of(tids), unit_vectors(6), SequentialRecurrenceEdges(r));
    CHECK(g.Wg == brute_force_weights(tids, r));
    CHECK(g.Wg == g.Wg.transpose());
    CHECK(g.A == g.A.transpose());
    CHECK(g.Wg.diagonal().isZero());
    CHECK(g.A.diagonal().isZero());
    CHECK(((g.Wg.array() > 0) == (g.A.array() > 0)).all());
    for (int i = 0; i + 1 < n; ++i) CHECK(g.A(i, i + 1) == 1.0);
  }
}

TEST_CASE("node features come from the vector table in window order") {
  const auto vectors = unit_vectors(3);
  const auto g = build_graph(window_of({2, 0, 1}), vectors, SequentialRecurrenceEdges(), 9);
  CHECK(g.graph_id == 9);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(g.X.row(i).transpose() == vectors.at(g.nodes[static_cast<std::size_t>(i)].template_id));
    CHECK(g.nodes[static_cast<std::size_t>(i)].node_index == i);
  }
}

TEST_CASE("missing vectors and tiny windows are rejected") {
  CHECK_THROWS_AS(build_graph(window_of({0, 7}), unit_vectors(2), SequentialRecurrenceEdges()),
                  MissingVector);
  CHECK_THROWS_AS(build_graph(window_of({0}), unit_vectors(2), SequentialRecurrenceEdges()),
                  ContractViolation);
}

TEST_CASE("count windows: 250 records in windows of 100") {
  WindowSpec spec;
  spec.count = 100;
  const auto p = partition(stream_of(std::vector<int>(250, 0)), spec);
  REQUIRE(p.windows.size() == 3);
  CHECK(p.windows[0].events.size() == 100);
  CHECK(p.windows[1].events.size() == 100);
  CHECK(p.windows[2].events.size() == 50);
  CHECK(p.dropped_windows == 0);
}

TEST_CASE("count windows drop a final singleton") {
  WindowSpec spec;
  spec.count = 100;
  const auto p = partition(stream_of(std::vector<int>(201, 0)), spec);
  CHECK(p.windows.size() == 2);
  CHECK(p.dropped_windows == 1);
  CHECK(p.dropped_records == 1);
}

TEST_CASE("session windows with one unkeyed record") {
  WindowSpec spec;
  spec.mode = WindowMode::kSession;
  auto s = stream_of(std::vector<int>(101, 0));
  for (std::size_t i = 0; i < s.size(); ++i) s[i].session_key = "blk_1";
  s[50].session_key = "";
  const auto p = partition(s, spec);
  REQUIRE(p.windows.size() == 1);
  CHECK(p.windows[0].events.size() == 100);
  CHECK(p.unkeyed_records == 1);
  CHECK(p.dropped_windows == 1);
  CHECK(p.dropped_records == 1);
}

TEST_CASE("session windows equal a hash-map group-by") {
  std::mt19937_64 rng(8);
  WindowSpec spec;
  spec.mode = WindowMode::kSession;
  std::vector<LogEvent> s;
  const std::vector<std::string> contents = {"blk_-38 x", "blk_992 y", "blk_7 z"};
  for (int i = 0; i < 300; ++i) {
    const auto& c = contents[rng() % contents.size()];
    s.push_back({i, static_cast<int>(rng() % 4), std::nullopt,
                 extract_session_key(c, spec.session_regex)});
  }
  std::unordered_map<std::string, std::vector<std::int64_t>> oracle;
  for (const auto& e : s) oracle[e.session_key].push_back(e.line_no);

  const auto p = partition(s, spec);
  REQUIRE(p.windows.size() == 3);
  for (const auto& w : p.windows) {
    std::vector<std::int64_t> lines;
    for (const auto& e : w.events) lines.push_back(e.line_no);
    CHECK(lines == oracle.at(w.key));
  }
  for (std::size_t i = 1; i < p.windows.size(); ++i) {
    CHECK(p.windows[i - 1].events.front().line_no < p.windows[i].events.front().line_no);
  }
}

TEST_CASE("session key extraction") {
  const std::string re = R"(blk_-?\d+)";
  CHECK(extract_session_key("Received block blk_-1608999687919862906 src", re) ==
        "blk_-1608999687919862906");
  CHECK(extract_session_key("no key here", re).empty());
}

TEST_CASE("node provenance covers every kept record exactly once") {
  WindowSpec spec;
  spec.count = 7;
  std::mt19937_64 rng(2);
  std::vector<int> tids;
  for (int i = 0; i < 99; ++i) tids.push_back(static_cast<int>(rng() % 3));
  const auto p = partition(stream_of(tids), spec);
  const auto graphs = build_graphs(p.windows, unit_vectors(3), SequentialRecurrenceEdges());
  std::vector<std::int64_t> seen;
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes) seen.push_back(n.line_no);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen.size() + p.dropped_records == tids.size());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("GraphSet JSONL round-trip") {
  const auto vectors = unit_vectors(4);
  auto stream = stream_of({0, 1, 0, 2, 3, 3, 1, 0});
  stream[2].label = 1;
  stream[3].label = 0;
  WindowSpec spec;
  spec.count = 5;
  const auto graphs =
      build_graphs(partition(stream, spec).windows, vectors, SequentialRecurrenceEdges(3));
  const auto path = std::filesystem::temp_directory_path() / "logloom_graphs_rt.jsonl";
  write_graphs(path, graphs);
  const auto back = read_graphs(path, vectors);
  REQUIRE(back.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CHECK(back[i].graph_id == graphs[i].graph_id);
    CHECK(back[i].X == graphs[i].X);
    CHECK(back[i].A == graphs[i].A);
    CHECK(back[i].Wg == graphs[i].Wg);
    REQUIRE(back[i].nodes.size() == graphs[i].nodes.size());
    for (std::size_t k = 0; k < back[i].nodes.size(); ++k) {
      CHECK(back[i].nodes[k].line_no == graphs[i].nodes[k].line_no);
      CHECK(back[i].nodes[k].label == graphs[i].nodes[k].label);
    }
  }
  CHECK_THROWS_AS(read_graphs(path, unit_vectors(4, 16)), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("edge strategy is swappable") {
  struct ChainOnly final : EdgeStrategy {
    Eigen::MatrixXd weights(const std::vector<int>& ids) const override {
      const auto n = static_cast<Eigen::Index>(ids.size());
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = 3.0;
      return w;
    }
  };
  const auto g = build_graph(window_of({0, 0, 0}), unit_vectors(1), ChainOnly());
  CHECK(g.Wg(0, 2) == 0.0);
  CHECK(g.Wg(0, 1) == 3.0);
}
