#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "logloom/clustering.hpp"

namespace logloom {

// Cluster ids are arbitrary non-negative ints; empty ids are ignored. Every
// index needs at least two non-empty clusters (MetricUndefined otherwise).

// Mean silhouette; members of singleton clusters score 0.
double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

// Scatter d_i = (mean |x - c_i|^q)^(1/q), separation = Minkowski-q distance
// between centroids. Coincident centroids raise MetricUndefined.
double davies_bouldin(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                      double q = 2.0);

// tr(B)(N - K) / (tr(W)(K - 1)); +inf when the within-cluster scatter is zero.
double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels);

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // rows without a label
};

// Abnormal matches label 1, Normal matches label 0.
AccuracyResult accuracy(const std::vector<Verdict>& verdicts,
                        const std::vector<std::optional<int>>& labels);

struct MetricReport {
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  double calinski_harabasz = 0.0;
  double log_calinski_harabasz = 0.0;
  std::optional<double> accuracy;
};

MetricReport evaluate(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                      double db_q = 2.0);

}  // namespace logloom
