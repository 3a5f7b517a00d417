#include "logloom/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "logloom/eigensolver.hpp"
#include "logloom/errors.hpp"

namespace logloom {

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

int nearest(const Eigen::RowVectorXd& x, const Eigen::MatrixXd& centroids, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& rows, int K, std::mt19937_64& rng) {
  const auto m = static_cast<std::size_t>(rows.rows());
  Eigen::MatrixXd centroids(K, rows.cols());
  centroids.row(0) = rows.row(static_cast<Eigen::Index>(uniform_index(rng, m)));
  std::vector<double> d2(m, std::numeric_limits<double>::infinity());
  for (int c = 1; c < K; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      d2[i] = std::min(d2[i], (rows.row(r) - centroids.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (pick = 0; pick + 1 < m; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = uniform_index(rng, m);
    }
    centroids.row(c) = rows.row(static_cast<Eigen::Index>(pick));
  }
  return centroids;
}

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double sse = 0.0;
  std::vector<double> trace;
};

LloydRun lloyd(const Eigen::MatrixXd& rows, Eigen::MatrixXd centroids, int iters) {
  const Eigen::Index m = rows.rows();
  const auto K = centroids.rows();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(m), -1);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      const int c = nearest(rows.row(i), centroids, nullptr);
      if (c != run.labels[static_cast<std::size_t>(i)]) {
        run.labels[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    // Empty clusters take the point farthest from its own centroid.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
    for (int l : run.labels) ++counts[static_cast<std::size_t>(l)];
    for (Eigen::Index c = 0; c < K; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const int own = run.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] <= 1) continue;
        const double d = (rows.row(i) - centroids.row(own)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      ++counts[static_cast<std::size_t>(c)];
      centroids.row(c) = rows.row(far);
      changed = true;
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(K, rows.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      next.row(run.labels[static_cast<std::size_t>(i)]) += rows.row(i);
    }
    for (Eigen::Index c = 0; c < K; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        next.row(c) = centroids.row(c);
      }
    }
    centroids = std::move(next);
    run.trace.push_back(within_sse(rows, run.labels, centroids));
    if (!changed && it > 0) break;
  }
  run.centroids = std::move(centroids);
  run.sse = run.trace.empty() ? 0.0 : run.trace.back();
  return run;
}

}  // namespace

void SpectralConfig::validate() const {
  if (K < 2) throw ConfigError("spectral K must be >= 2");
  if (knn < 1) throw ConfigError("spectral knn must be >= 1");
  if (kmeans_restarts < 1) throw ConfigError("kmeans_restarts must be >= 1");
  if (kmeans_iters < 1) throw ConfigError("kmeans_iters must be >= 1");
  if (dense_limit < 1) throw ConfigError("dense_limit must be >= 1");
}

double median_pairwise_distance(const Eigen::MatrixXd& points, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(points.rows());
  const std::size_t pairs = m * (m - 1) / 2;
  std::vector<double> d;
  if (pairs <= kMedianPairLimit) {
    d.reserve(pairs);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
        const double x = (points.row(i) - points.row(j)).norm();
        if (x > 0.0) d.push_back(x);
      }
    }
  } else {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    d.reserve(kMedianPairLimit);
    for (std::size_t s = 0; s < kMedianPairLimit; ++s) {
      const auto i = static_cast<Eigen::Index>(uniform_index(rng, m));
      const auto j = static_cast<Eigen::Index>(uniform_index(rng, m));
      if (i == j) continue;
      const double x = (points.row(i) - points.row(j)).norm();
      if (x > 0.0) d.push_back(x);
    }
  }
  if (d.empty()) return 0.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

namespace {

using Neighbors = std::vector<std::vector<std::pair<double, Eigen::Index>>>;

// Squared distances to the k nearest other rows, ties to the lower index.
Neighbors nearest(const Eigen::MatrixXd& points, Eigen::Index k) {
  const Eigen::Index m = points.rows();
  Neighbors out(static_cast<std::size_t>(m));
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(m - 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::size_t at = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) dist[at++] = {(points.row(i) - points.row(j)).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    out[static_cast<std::size_t>(i)].assign(dist.begin(), dist.begin() + k);
  }
  return out;
}

double median_of_nonzero(const Neighbors& lists) {
  std::vector<double> d;
  for (const auto& list : lists) {
    for (const auto& [d2, j] : list) {
      if (d2 > 0.0) d.push_back(std::sqrt(d2));
    }
  }
  if (d.empty()) return 0.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  return 0.5 * (*std::max_element(d.begin(), mid) + *mid);
}

}  // namespace

double median_knn_distance(const Eigen::MatrixXd& points, int knn, std::uint64_t seed) {
  if (points.rows() < 2 || knn < 1) return 0.0;
  const double s = median_of_nonzero(
      nearest(points, std::min<Eigen::Index>(knn, points.rows() - 1)));
  return s > 0.0 ? s : median_pairwise_distance(points, seed);
}

SimilarityMatrix similarity(const Eigen::MatrixXd& points, const SpectralConfig& cfg) {
  cfg.validate();
  const Eigen::Index m = points.rows();
  if (m < cfg.K) {
    throw ContractViolation("similarity needs at least K=" + std::to_string(cfg.K) +
                            " rows, got " + std::to_string(m));
  }
  if (!points.allFinite()) throw NumericalError("embedding has non-finite entries");
  bool identical = true;
  for (Eigen::Index i = 1; i < m && identical; ++i) {
    identical = points.row(i) == points.row(0);
  }
  if (identical) {
    throw DegenerateEmbedding("all " + std::to_string(m) +
                              " embedding rows are identical; nothing to cluster");
  }

  const Eigen::Index k = std::min<Eigen::Index>(cfg.knn, m - 1);
  const Neighbors lists = nearest(points, k);

  // Kernel denominator per pair: 2 sigma^2 globally, s_i s_j when self-tuning.
  std::vector<double> scale;
  SimilarityMatrix out;
  if (cfg.sigma > 0.0) {
    out.sigma = cfg.sigma;
  } else if (cfg.sigma_rule == SigmaRule::kSelfTuning) {
    const auto nth = static_cast<std::size_t>(std::min<Eigen::Index>(kSelfTuningNeighbor, k) - 1);
    scale.resize(static_cast<std::size_t>(m));
    std::vector<double> positive;
    for (std::size_t i = 0; i < scale.size(); ++i) {
      scale[i] = std::sqrt(lists[i][nth].first);
      if (scale[i] > 0.0) positive.push_back(scale[i]);
    }
    // Rows with duplicates out to the nth neighbor borrow the median scale.
    double fallback = 0.0;
    if (!positive.empty()) {
      const auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
      std::nth_element(positive.begin(), mid, positive.end());
      fallback = *mid;
    } else {
      fallback = median_pairwise_distance(points, cfg.seed);
    }
    for (double& s : scale) {
      if (s == 0.0) s = fallback;
    }
    out.sigma = fallback;
  } else if (cfg.sigma_rule == SigmaRule::kKnnMedian) {
    out.sigma = median_of_nonzero(lists);
    if (out.sigma == 0.0) out.sigma = median_pairwise_distance(points, cfg.seed);
  } else {
    out.sigma = median_pairwise_distance(points, cfg.seed);
  }
  const double global_denom = 2.0 * out.sigma * out.sigma;

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * m * k));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (const auto& [d2, j] : lists[static_cast<std::size_t>(i)]) {
      const double denom = scale.empty() ? global_denom
                                         : scale[static_cast<std::size_t>(i)] *
                                               scale[static_cast<std::size_t>(j)];
      const double s = std::exp(-d2 / denom);
      triplets.emplace_back(i, j, s);
      triplets.emplace_back(j, i, s);
    }
  }
  out.S.resize(m, m);
  // Duplicate (i, j) entries carry the same kernel value: keep one.
  out.S.setFromTriplets(triplets.begin(), triplets.end(),
                        [](double a, double b) { return std::max(a, b); });
  return out;
}

Sparse laplacian(const Sparse& S) {
  const Eigen::Index m = S.rows();
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(m);
  for (int c = 0; c < S.outerSize(); ++c) {
    for (Sparse::InnerIterator it(S, c); it; ++it) degree[it.row()] += it.value();
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(S.nonZeros() + m));
  for (Eigen::Index i = 0; i < m; ++i) triplets.emplace_back(i, i, 1.0);
  for (int c = 0; c < S.outerSize(); ++c) {
    for (Sparse::InnerIterator it(S, c); it; ++it) {
      const double di = degree[it.row()], dj = degree[it.col()];
      if (di > 0.0 && dj > 0.0) {
        triplets.emplace_back(it.row(), it.col(), -it.value() / std::sqrt(di * dj));
      }
    }
  }
  Sparse L(m, m);
  L.setFromTriplets(triplets.begin(), triplets.end());
  return L;
}

std::vector<int> connected_components(const Sparse& M, int* count) {
  const Eigen::Index m = M.rows();
  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(m));
  for (int c = 0; c < M.outerSize(); ++c) {
    for (Sparse::InnerIterator it(M, c); it; ++it) {
      if (it.row() != it.col() && it.value() != 0.0) {
        adj[static_cast<std::size_t>(it.row())].push_back(it.col());
        adj[static_cast<std::size_t>(it.col())].push_back(it.row());
      }
    }
  }
  std::vector<int> comp(static_cast<std::size_t>(m), -1);
  int next = 0;
  std::vector<Eigen::Index> stack;
  for (Eigen::Index s = 0; s < m; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comp[static_cast<std::size_t>(s)] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : adj[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

SpectralEmbedding smallest_eigenvectors(const Sparse& L, int K, int dense_limit) {
  const Eigen::Index m = L.rows();
  if (L.cols() != m) throw ContractViolation("Laplacian must be square");
  if (K < 1 || K > m) throw ContractViolation("K out of range for eigen decomposition");

  int ncomp = 0;
  const std::vector<int> comp = connected_components(L, &ncomp);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(ncomp));
  for (Eigen::Index i = 0; i < m; ++i) {
    members[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])].push_back(i);
  }

  struct Candidate {
    double value;
    int component;
    Eigen::VectorXd local;
  };
  std::vector<Candidate> candidates;
  std::vector<Eigen::Index> local_index(static_cast<std::size_t>(m));
  for (int c = 0; c < ncomp; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    const auto size = static_cast<Eigen::Index>(idx.size());
    for (Eigen::Index a = 0; a < size; ++a) local_index[static_cast<std::size_t>(idx[a])] = a;
    std::vector<Triplet> triplets;
    for (auto row : idx) {
      for (Sparse::InnerIterator it(L, row); it; ++it) {
        // L is symmetric, so column `row` doubles as its row.
        triplets.emplace_back(local_index[static_cast<std::size_t>(it.row())],
                              local_index[static_cast<std::size_t>(row)], it.value());
      }
    }
    Sparse sub(size, size);
    sub.setFromTriplets(triplets.begin(), triplets.end());
    const int want = static_cast<int>(std::min<Eigen::Index>(K, size));
    EigenDecomposition eig;
    if (size <= dense_limit) {
      eig = jacobi_eigen(Eigen::MatrixXd(sub));
    } else {
      eig = lanczos_smallest(sub, want);
    }
    for (int i = 0; i < want; ++i) {
      candidates.push_back({eig.values[i], c, eig.vectors.col(i)});
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const Candidate& a, const Candidate& b) {
                     if (std::abs(a.value - b.value) > 1e-9) return a.value < b.value;
                     const auto sa = members[static_cast<std::size_t>(a.component)].size();
                     const auto sb = members[static_cast<std::size_t>(b.component)].size();
                     if (sa != sb) return sa > sb;
                     return a.component < b.component;
                   });

  SpectralEmbedding out;
  out.components = ncomp;
  out.values.resize(K);
  out.vectors = Eigen::MatrixXd::Zero(m, K);
  for (int k = 0; k < K; ++k) {
    const auto& cand = candidates[static_cast<std::size_t>(k)];
    out.values[k] = cand.value;
    const auto& idx = members[static_cast<std::size_t>(cand.component)];
    for (std::size_t a = 0; a < idx.size(); ++a) {
      out.vectors(idx[a], k) = cand.local[static_cast<Eigen::Index>(a)];
    }
  }
  out.rows = out.vectors;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = out.rows.row(i).norm();
    if (norm > 0.0) out.rows.row(i) /= norm;
  }
  return out;
}

double within_sse(const Eigen::MatrixXd& rows, const std::vector<int>& labels,
                  const Eigen::MatrixXd& centroids) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    sse += (rows.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return sse;
}

KMeansResult kmeans(const Eigen::MatrixXd& rows, const SpectralConfig& cfg) {
  cfg.validate();
  if (rows.rows() < cfg.K) {
    throw ContractViolation("kmeans needs at least K rows");
  }
  std::mt19937_64 rng(cfg.seed);
  KMeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.kmeans_restarts; ++r) {
    LloydRun run = lloyd(rows, plus_plus_init(rows, cfg.K, rng), cfg.kmeans_iters);
    if (run.sse < best.sse) {
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.sse = run.sse;
      best.sse_trace = std::move(run.trace);
      best.best_restart = r;
    }
  }
  return best;
}

SpectralResult spectral_cluster(const Eigen::MatrixXd& points,
                                const std::vector<NodeRef>& rows,
                                const SpectralConfig& cfg) {
  cfg.validate();
  if (!rows.empty() && rows.size() != static_cast<std::size_t>(points.rows())) {
    throw ContractViolation("provenance rows do not match embedding rows");
  }
  SpectralResult out;
  const SimilarityMatrix sim = similarity(points, cfg);
  out.sigma = sim.sigma;
  out.embedding = smallest_eigenvectors(laplacian(sim.S), cfg.K, cfg.dense_limit);
  const KMeansResult km = kmeans(out.embedding.rows, cfg);
  out.assignment.cluster = km.labels;
  out.assignment.rows = rows;
  out.assignment.sizes.assign(static_cast<std::size_t>(cfg.K), 0);
  for (int l : km.labels) ++out.assignment.sizes[static_cast<std::size_t>(l)];
  return out;
}

const char* to_string(Verdict v) {
  return v == Verdict::kAbnormal ? "Abnormal" : "Normal";
}

AnomalyLabels label_anomalies(const ClusterAssignment& assignment) {
  if (assignment.sizes.size() != 2) {
    throw ContractViolation("anomaly labelling needs exactly K = 2 clusters");
  }
  AnomalyLabels out;
  out.abnormal_cluster = assignment.sizes[1] > assignment.sizes[0] ? 0 : 1;
  out.verdicts.reserve(assignment.cluster.size());
  for (int c : assignment.cluster) {
    out.verdicts.push_back(c == out.abnormal_cluster ? Verdict::kAbnormal
                                                     : Verdict::kNormal);
  }
  return out;
}

void write_assignment_csv(const std::filesystem::path& path,
                          const ClusterAssignment& assignment,
                          const AnomalyLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "line_no,graph_id,node_index,cluster,verdict\n";
  for (std::size_t i = 0; i < assignment.cluster.size(); ++i) {
    const auto& r = assignment.rows[i];
    out << r.line_no << ',' << r.graph_id << ',' << r.node_index << ','
        << assignment.cluster[i] << ',' << to_string(labels.verdicts[i]) << '\n';
  }
}

std::vector<AssignmentRow> read_assignment_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "line_no,graph_id,node_index,cluster,verdict") {
    throw FormatError(path.string() + ": missing assignment header");
  }
  std::vector<AssignmentRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& x : f) std::getline(ss, x, ',');
    AssignmentRow r;
    try {
      r.line_no = std::stoll(f[0]);
      r.graph_id = std::stoi(f[1]);
      r.node_index = std::stoi(f[2]);
      r.cluster = std::stoi(f[3]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
    if (f[4] == "Abnormal") {
      r.verdict = Verdict::kAbnormal;
    } else if (f[4] == "Normal") {
      r.verdict = Verdict::kNormal;
    } else {
      throw FormatError(path.string() + ": bad verdict '" + f[4] + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace logloom
