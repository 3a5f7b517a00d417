#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logloom/encoder.hpp"

namespace logloom {

// One structured log record as seen by the graph stage.
struct LogEvent {
  std::int64_t line_no = 0;
  int template_id = 0;
  std::optional<int> label;
  std::string session_key;  // empty when the extractor found no key
};

enum class WindowMode { kCount, kSession };

struct WindowSpec {
  WindowMode mode = WindowMode::kCount;
  int count = 100;
  std::string session_regex = R"(blk_-?\d+)";

  void validate() const;
};

inline constexpr const char* kUnkeyedSession = "_unkeyed";

struct Window {
  std::string key;
  std::vector<LogEvent> events;
};

struct Partition {
  std::vector<Window> windows;
  std::size_t dropped_windows = 0;
  std::size_t dropped_records = 0;
  std::size_t unkeyed_records = 0;
};

// Windows come out ordered by their first line_no.
Partition partition(const std::vector<LogEvent>& stream, const WindowSpec& spec);

// First match of the session regex in content, or "" if none.
std::string extract_session_key(const std::string& content,
                                const std::string& session_regex);

struct GraphNode {
  int node_index = 0;
  std::int64_t line_no = 0;
  int template_id = 0;
  std::optional<int> label;
};

struct WindowGraph {
  int graph_id = 0;
  std::vector<GraphNode> nodes;
  Eigen::MatrixXd X;   // n x D
  Eigen::MatrixXd A;   // 0/1, symmetric, zero diagonal
  Eigen::MatrixXd Wg;  // nonnegative, nonzero exactly where A is

  Eigen::Index size() const { return static_cast<Eigen::Index>(nodes.size()); }
  std::size_t edge_count() const;
};

using GraphSet = std::vector<WindowGraph>;

// Turns a window's template sequence into a symmetric weight matrix.
class EdgeStrategy {
 public:
  virtual ~EdgeStrategy() = default;
  virtual Eigen::MatrixXd weights(const std::vector<int>& template_ids) const = 0;
};

// Consecutive records get weight 1; records sharing a template at position
// gap g <= radius get 1/g. Weights from both rules add.
class SequentialRecurrenceEdges final : public EdgeStrategy {
 public:
  explicit SequentialRecurrenceEdges(int radius = 10) : radius_(radius) {}
  Eigen::MatrixXd weights(const std::vector<int>& template_ids) const override;
  int radius() const { return radius_; }

 private:
  int radius_;
};

WindowGraph build_graph(const Window& window, const VectorTable& vectors,
                        const EdgeStrategy& edges, int graph_id = 0);

GraphSet build_graphs(const std::vector<Window>& windows,
                      const VectorTable& vectors, const EdgeStrategy& edges);

// Line-delimited JSON; X is rebuilt from the vector table on read.
void write_graphs(const std::filesystem::path& path, const GraphSet& graphs);
GraphSet read_graphs(const std::filesystem::path& path, const VectorTable& vectors);

}  // namespace logloom
