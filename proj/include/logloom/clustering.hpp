#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "logloom/autoencoder.hpp"

namespace logloom {

// Bandwidth used when SpectralConfig::sigma is not set.
enum class SigmaRule {
  // Per-row scale s_i = distance to the row's min(7, knn)-th neighbor and
  // kernel exp(-d^2 / (s_i s_j)), after Zelnik-Manor and Perona.
  kSelfTuning,
  kKnnMedian,       // one sigma: median nonzero distance over the kNN lists
  kPairwiseMedian,  // one sigma: median nonzero distance over all pairs
};

inline constexpr int kSelfTuningNeighbor = 7;

struct SpectralConfig {
  int K = 2;
  int knn = 10;
  double sigma = 0.0;  // <= 0: derived by sigma_rule
  SigmaRule sigma_rule = SigmaRule::kSelfTuning;
  int kmeans_restarts = 10;
  int kmeans_iters = 100;
  std::uint64_t seed = 0;
  // Connected components up to this size use dense Jacobi, larger ones Lanczos.
  int dense_limit = 400;

  void validate() const;
};

struct SimilarityMatrix {
  Eigen::SparseMatrix<double> S;  // symmetric, zero diagonal
  double sigma = 0.0;             // median local scale under self-tuning
};

// Median of the nonzero pairwise Euclidean distances; above
// kMedianPairLimit pairs a seeded uniform sample of that many pairs is used.
inline constexpr std::size_t kMedianPairLimit = 4'000'000;
double median_pairwise_distance(const Eigen::MatrixXd& points, std::uint64_t seed = 0);

// Median of the nonzero distances from each row to its knn nearest rows;
// falls back to median_pairwise_distance when every such distance is zero.
double median_knn_distance(const Eigen::MatrixXd& points, int knn, std::uint64_t seed = 0);

// Gaussian kernel on pairs where either endpoint is among the other's knn
// nearest rows (ties to the lower row index).
SimilarityMatrix similarity(const Eigen::MatrixXd& points, const SpectralConfig& cfg);

// I - D^-1/2 S D^-1/2; rows with zero degree keep a unit diagonal.
Eigen::SparseMatrix<double> laplacian(const Eigen::SparseMatrix<double>& S);

// Connected components of the off-diagonal pattern, labelled in order of
// their lowest row index.
std::vector<int> connected_components(const Eigen::SparseMatrix<double>& M,
                                      int* count = nullptr);

struct SpectralEmbedding {
  Eigen::VectorXd values;   // K smallest eigenvalues, ascending
  Eigen::MatrixXd vectors;  // m x K eigenvectors before row scaling
  Eigen::MatrixXd rows;     // m x K, rows L2-normalized (zero rows kept)
  int components = 0;
};

// Solved per connected component and merged by ascending eigenvalue; values
// within 1e-9 of each other prefer the larger component.
SpectralEmbedding smallest_eigenvectors(const Eigen::SparseMatrix<double>& L, int K,
                                        int dense_limit = 400);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double sse = 0.0;
  int best_restart = 0;
  std::vector<double> sse_trace;  // per Lloyd iteration of the best restart
};

double within_sse(const Eigen::MatrixXd& rows, const std::vector<int>& labels,
                  const Eigen::MatrixXd& centroids);

KMeansResult kmeans(const Eigen::MatrixXd& rows, const SpectralConfig& cfg);

struct ClusterAssignment {
  std::vector<int> cluster;
  std::vector<NodeRef> rows;
  std::vector<std::size_t> sizes;
};

struct SpectralResult {
  ClusterAssignment assignment;
  double sigma = 0.0;
  SpectralEmbedding embedding;
};

SpectralResult spectral_cluster(const Eigen::MatrixXd& points,
                                const std::vector<NodeRef>& rows,
                                const SpectralConfig& cfg);

enum class Verdict { kNormal, kAbnormal };
const char* to_string(Verdict v);

struct AnomalyLabels {
  std::vector<Verdict> verdicts;  // aligned with ClusterAssignment::rows
  int abnormal_cluster = 1;
};

// K = 2 only: the larger cluster is Normal; on a tie cluster 0 is Normal.
AnomalyLabels label_anomalies(const ClusterAssignment& assignment);

void write_assignment_csv(const std::filesystem::path& path,
                          const ClusterAssignment& assignment,
                          const AnomalyLabels& labels);

struct AssignmentRow {
  std::int64_t line_no = 0;
  int graph_id = 0;
  int node_index = 0;
  int cluster = 0;
  Verdict verdict = Verdict::kNormal;
};
std::vector<AssignmentRow> read_assignment_csv(const std::filesystem::path& path);

}  // namespace logloom
