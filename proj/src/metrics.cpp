#include "logloom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

struct Groups {
  std::vector<int> ids;                      // distinct cluster ids, ascending
  std::vector<std::size_t> slot;             // per point: index into ids
  std::vector<std::size_t> size;
  Eigen::MatrixXd centroids;                 // one row per id
};

Groups group(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(points.rows())) {
    throw ContractViolation("labels and points differ in length");
  }
  if (!points.allFinite()) throw NumericalError("metric input has non-finite entries");
  std::map<int, std::size_t> index;
  for (int l : labels) {
    if (l < 0) throw ContractViolation("negative cluster id");
    index.emplace(l, 0);
  }
  Groups g;
  for (auto& [id, slot] : index) {
    slot = g.ids.size();
    g.ids.push_back(id);
  }
  if (g.ids.size() < 2) {
    throw MetricUndefined("clustering index needs at least two clusters");
  }
  g.size.assign(g.ids.size(), 0);
  g.centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.ids.size()), points.cols());
  g.slot.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t s = index[labels[i]];
    g.slot.push_back(s);
    ++g.size[s];
    g.centroids.row(static_cast<Eigen::Index>(s)) += points.row(static_cast<Eigen::Index>(i));
  }
  for (std::size_t s = 0; s < g.size.size(); ++s) {
    g.centroids.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(g.size[s]);
  }
  return g;
}

}  // namespace

double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const Groups g = group(points, labels);
  const Eigen::Index n = points.rows();
  const std::size_t k = g.ids.size();
  std::vector<double> sum(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t own = g.slot[static_cast<std::size_t>(i)];
    if (g.size[own] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) sum[g.slot[static_cast<std::size_t>(j)]] += (points.row(i) - points.row(j)).norm();
    }
    const double a = sum[own] / static_cast<double>(g.size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sum[c] / static_cast<double>(g.size[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double davies_bouldin(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                      double q) {
  if (!(q >= 1.0)) throw ContractViolation("Davies-Bouldin q must be >= 1");
  const Groups g = group(points, labels);
  const std::size_t k = g.ids.size();
  std::vector<double> scatter(k, 0.0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const std::size_t s = g.slot[static_cast<std::size_t>(i)];
    const double dist = (points.row(i) - g.centroids.row(static_cast<Eigen::Index>(s))).norm();
    scatter[s] += std::pow(dist, q);
  }
  for (std::size_t s = 0; s < k; ++s) {
    scatter[s] = std::pow(scatter[s] / static_cast<double>(g.size[s]), 1.0 / q);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const Eigen::RowVectorXd diff = g.centroids.row(static_cast<Eigen::Index>(a)) -
                                      g.centroids.row(static_cast<Eigen::Index>(b));
      const double sep = std::pow(diff.array().abs().pow(q).sum(), 1.0 / q);
      if (sep == 0.0) {
        throw MetricUndefined("Davies-Bouldin undefined: clusters " +
                              std::to_string(g.ids[a]) + " and " +
                              std::to_string(g.ids[b]) + " share a centroid");
      }
      worst = std::max(worst, (scatter[a] + scatter[b]) / sep);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const Groups g = group(points, labels);
  const auto n = static_cast<double>(points.rows());
  const auto k = static_cast<double>(g.ids.size());
  if (!(n > k)) throw MetricUndefined("Calinski-Harabasz needs more points than clusters");
  const Eigen::RowVectorXd overall = points.colwise().mean();
  double between = 0.0;
  for (std::size_t s = 0; s < g.ids.size(); ++s) {
    between += static_cast<double>(g.size[s]) *
               (g.centroids.row(static_cast<Eigen::Index>(s)) - overall).squaredNorm();
  }
  double within = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    within += (points.row(i) -
               g.centroids.row(static_cast<Eigen::Index>(g.slot[static_cast<std::size_t>(i)])))
                  .squaredNorm();
  }
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return between * (n - k) / (within * (k - 1.0));
}

AccuracyResult accuracy(const std::vector<Verdict>& verdicts,
                        const std::vector<std::optional<int>>& labels) {
  if (verdicts.size() != labels.size()) {
    throw ContractViolation("verdicts and labels differ in length");
  }
  AccuracyResult out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (!labels[i]) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    const bool abnormal = verdicts[i] == Verdict::kAbnormal;
    if (abnormal == (*labels[i] != 0)) ++correct;
  }
  out.accuracy = out.evaluated
                     ? static_cast<double>(correct) / static_cast<double>(out.evaluated)
                     : 0.0;
  return out;
}

MetricReport evaluate(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                      double db_q) {
  MetricReport r;
  r.silhouette = silhouette(points, labels);
  r.davies_bouldin = davies_bouldin(points, labels, db_q);
  r.calinski_harabasz = calinski_harabasz(points, labels);
  r.log_calinski_harabasz = std::log(r.calinski_harabasz);
  return r;
}

}  // namespace logloom
