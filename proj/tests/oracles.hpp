#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Written from the textbook definitions with plain loops.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "logloom/autoencoder.hpp"

namespace oracle {

inline double dist(const Eigen::MatrixXd& p, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < p.cols(); ++d) {
    const double x = p(static_cast<Eigen::Index>(i), d) - p(static_cast<Eigen::Index>(j), d);
    s += x * x;
  }
  return std::sqrt(s);
}

inline std::vector<std::vector<std::size_t>> members(const std::vector<int>& labels, int k) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

inline std::vector<std::vector<double>> centroids(const Eigen::MatrixXd& p,
                                                  const std::vector<std::vector<std::size_t>>& m) {
  std::vector<std::vector<double>> c;
  for (const auto& group : m) {
    std::vector<double> mean(static_cast<std::size_t>(p.cols()), 0.0);
    for (std::size_t i : group) {
      for (Eigen::Index d = 0; d < p.cols(); ++d) {
        mean[static_cast<std::size_t>(d)] += p(static_cast<Eigen::Index>(i), d);
      }
    }
    for (double& x : mean) x /= static_cast<double>(group.size());
    c.push_back(mean);
  }
  return c;
}

// Labels are 0..k-1 and every cluster is non-empty.
inline double silhouette(const Eigen::MatrixXd& p, const std::vector<int>& labels, int k) {
  const auto m = members(labels, k);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& own = m[static_cast<std::size_t>(labels[i])];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (std::size_t j : own) a += dist(p, i, j);
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == labels[i]) continue;
      double s = 0.0;
      for (std::size_t j : m[static_cast<std::size_t>(c)]) s += dist(p, i, j);
      b = std::min(b, s / static_cast<double>(m[static_cast<std::size_t>(c)].size()));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(labels.size());
}

inline double davies_bouldin(const Eigen::MatrixXd& p, const std::vector<int>& labels, int k) {
  const auto m = members(labels, k);
  const auto c = centroids(p, m);
  std::vector<double> scatter;
  for (std::size_t g = 0; g < m.size(); ++g) {
    double s = 0.0;
    for (std::size_t i : m[g]) {
      for (Eigen::Index d = 0; d < p.cols(); ++d) {
        s += std::pow(p(static_cast<Eigen::Index>(i), d) - c[g][static_cast<std::size_t>(d)], 2);
      }
    }
    scatter.push_back(std::sqrt(s / static_cast<double>(m[g].size())));
  }
  double total = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    double worst = 0.0;
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (a == b) continue;
      double sep = 0.0;
      for (std::size_t d = 0; d < c[a].size(); ++d) sep += std::pow(c[a][d] - c[b][d], 2);
      worst = std::max(worst, (scatter[a] + scatter[b]) / std::sqrt(sep));
    }
    total += worst;
  }
  return total / static_cast<double>(m.size());
}

// Traces of the between and within scatter matrices built explicitly.
inline double calinski_harabasz(const Eigen::MatrixXd& p, const std::vector<int>& labels, int k) {
  const auto m = members(labels, k);
  const Eigen::VectorXd overall = p.colwise().mean().transpose();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p.cols(), p.cols());
  Eigen::MatrixXd W = B;
  for (const auto& group : m) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(p.cols());
    for (std::size_t i : group) c += p.row(static_cast<Eigen::Index>(i)).transpose();
    c /= static_cast<double>(group.size());
    B += static_cast<double>(group.size()) * (c - overall) * (c - overall).transpose();
    for (std::size_t i : group) {
      const Eigen::VectorXd x = p.row(static_cast<Eigen::Index>(i)).transpose() - c;
      W += x * x.transpose();
    }
  }
  const double n = static_cast<double>(labels.size());
  return B.trace() * (n - k) / (W.trace() * (k - 1));
}

struct MetricInstance {
  Eigen::MatrixXd points;
  std::vector<int> labels;
  int k = 2;
};

// 2 to 4 clusters, every id present, 1 to 5 dimensions.
inline MetricInstance random_metric_instance(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MetricInstance in;
  in.k = 2 + static_cast<int>(rng() % 3);
  const int n = in.k + 2 + static_cast<int>(rng() % 30);
  const int d = 1 + static_cast<int>(rng() % 5);
  in.points.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int c = i < in.k ? i : static_cast<int>(rng() % static_cast<unsigned>(in.k));
    in.labels.push_back(c);
    for (int j = 0; j < d; ++j) in.points(i, j) = g(rng) + 3.0 * c;
  }
  return in;
}

// Real roots of x^3 + a x^2 + b x + c when all three are real, ascending.
inline std::vector<double> cubic_roots(double a, double b, double c) {
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double phi = std::acos(3.0 * q / (p * r));
  std::vector<double> out;
  for (int k = 0; k < 3; ++k) {
    out.push_back(r * std::cos((phi - 2.0 * std::numbers::pi * k) / 3.0) - a / 3.0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(rng);
  }
  return m;
}

// Connected weighted graph: a chain plus random extra edges.
inline logloom::WindowGraph random_graph(int n, int D, std::mt19937_64& rng,
                                         double density = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  logloom::WindowGraph g;
  g.X.resize(n, D);
  for (Eigen::Index i = 0; i < g.X.size(); ++i) g.X.data()[i] = 2.0 * u(rng) - 1.0;
  g.Wg = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (j == i + 1 || u(rng) < density) g.Wg(i, j) = g.Wg(j, i) = 0.2 + 1.8 * u(rng);
    }
  }
  g.A = (g.Wg.array() > 0.0).cast<double>().matrix();
  for (int i = 0; i < n; ++i) g.nodes.push_back({i, i, 0, std::nullopt});
  return g;
}

inline Eigen::MatrixXd& weight_slot(logloom::ModelWeights& w, int k) {
  switch (k) {
    case 0: return w.W0;
    case 1: return w.W1;
    case 2: return w.V0;
    default: return w.V1;
  }
}

// Largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-8) over every
// weight entry, numeric by central differences.
inline double gradient_error(const logloom::WindowGraph& g, const logloom::ModelWeights& w0,
                             double lambda, double eps = 1e-5) {
  logloom::ModelWeights analytic = logloom::gradients(g, w0, lambda);
  logloom::ModelWeights w = w0;
  auto total = [&] {
    const auto f = logloom::forward(g, w);
    return logloom::loss(g, f.X_rec, f.A_rec, f.Z, lambda).total;
  };
  double worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    Eigen::MatrixXd& m = weight_slot(w, k);
    const Eigen::MatrixXd& a = weight_slot(analytic, k);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + eps;
      const double up = total();
      m.data()[i] = keep - eps;
      const double down = total();
      m.data()[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double an = a.data()[i];
      worst = std::max(worst, std::abs(an - numeric) /
                                  std::max(std::abs(an) + std::abs(numeric), 1e-8));
    }
  }
  return worst;
}

// Two Gaussian blobs of `per` points, unit spread, centers `separation` apart.
inline Eigen::MatrixXd blobs(int per, double separation, std::uint64_t seed, int dims = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd p(2 * per, dims);
  for (int i = 0; i < 2 * per; ++i) {
    for (int d = 0; d < dims; ++d) p(i, d) = g(rng) + (i >= per && d == 0 ? separation : 0.0);
  }
  return p;
}

// Share of points whose cluster agrees with blob membership (rows < per in blob 0).
inline double purity(const std::vector<int>& labels, int per) {
  int agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    agree += labels[i] == (static_cast<int>(i) >= per ? 1 : 0);
  }
  const int n = static_cast<int>(labels.size());
  return static_cast<double>(std::max(agree, n - agree)) / n;
}

}  // namespace oracle
