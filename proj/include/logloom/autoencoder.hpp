#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "logloom/graph.hpp"

namespace logloom {

inline constexpr Eigen::Index kMaxGraphNodes = 5000;

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I. A may carry edge
// weights; it must be symmetric with a zero diagonal.
Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& A);

struct TrainConfig {
  double lambda = 0.1;
  double learning_rate = 0.01;
  int epochs = 200;
  std::uint64_t seed = 0;
  int hidden1 = 32;
  int hidden2 = 16;

  void validate() const;
};

// Encoder W0 (D x h1), W1 (h1 x h2); decoder V0 (h2 x h1), V1 (h1 x D).
struct ModelWeights {
  Eigen::MatrixXd W0, W1, V0, V1;

  int input_dim() const { return static_cast<int>(W0.rows()); }
  int hidden1() const { return static_cast<int>(W0.cols()); }
  int hidden2() const { return static_cast<int>(W1.cols()); }

  // Glorot-uniform, filled W0, W1, V0, V1 in row-major order from one stream.
  static ModelWeights glorot(int input_dim, int hidden1, int hidden2,
                             std::uint64_t seed);
  static ModelWeights zeros(int input_dim, int hidden1, int hidden2);

  bool all_finite() const;
};

// Everything the forward pass produces for one graph; kept for backprop.
struct ForwardPass {
  Eigen::MatrixXd norm_adj;  // Â_norm built from Wg
  Eigen::MatrixXd enc_pre;   // Â X W0
  Eigen::MatrixXd enc_hidden;
  Eigen::MatrixXd Z;
  Eigen::MatrixXd dec_pre;   // Â Z V0
  Eigen::MatrixXd dec_hidden;
  Eigen::MatrixXd X_rec;
  Eigen::MatrixXd logits;    // dec_hidden dec_hiddenᵀ
  Eigen::MatrixXd A_rec;     // sigmoid(logits)
};

Eigen::MatrixXd encode(const WindowGraph& graph, const ModelWeights& weights);

struct Reconstruction {
  Eigen::MatrixXd X_rec;
  Eigen::MatrixXd A_rec;
};
// The decoder reuses the input graph's normalized adjacency.
Reconstruction decode(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& norm_adj,
                      const ModelWeights& weights);

ForwardPass forward(const WindowGraph& graph, const ModelWeights& weights);

struct LossBreakdown {
  double feature = 0.0;    // MSE(X_rec, X)
  double adjacency = 0.0;  // BCE(A_rec, A + I), mean over n^2
  double weight = 0.0;     // MSE(A_rec, Wg / max Wg) on edges
  double smoothness = 0.0; // tr(Zᵀ (D - Wg) Z) / n
  double total = 0.0;      // feature + adjacency + weight + lambda * smoothness
};

LossBreakdown loss(const WindowGraph& graph, const Eigen::MatrixXd& X_rec,
                   const Eigen::MatrixXd& A_rec, const Eigen::MatrixXd& Z,
                   double lambda);

// Analytic gradient of loss(...).total with respect to every weight matrix.
ModelWeights gradients(const WindowGraph& graph, const ModelWeights& weights,
                       double lambda, LossBreakdown* breakdown = nullptr);

struct TrainResult {
  ModelWeights weights;
  std::vector<double> loss_trace;  // mean per-graph loss, one per epoch
};

// One gradient step per graph, graphs in GraphSet order, for cfg.epochs passes.
TrainResult train(const GraphSet& graphs, const TrainConfig& cfg);

struct NodeRef {
  int graph_id = 0;
  int node_index = 0;
  std::int64_t line_no = 0;
  std::optional<int> label;
};

struct NodeEmbeddings {
  Eigen::MatrixXd Z;  // rows graph-major, node-minor
  std::vector<NodeRef> rows;
};

NodeEmbeddings embed_all(const GraphSet& graphs, const ModelWeights& weights);

void write_weights(const std::filesystem::path& path, const ModelWeights& weights);
ModelWeights read_weights(const std::filesystem::path& path);

void write_loss_trace(const std::filesystem::path& path,
                      const std::vector<double>& trace);
std::vector<double> read_loss_trace(const std::filesystem::path& path);

}  // namespace logloom
