#include "logloom/autoencoder.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void fill_glorot(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
  }
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

double safe_log(double x) { return std::log(std::max(x, 1e-15)); }

void check_graph(const WindowGraph& g, int input_dim) {
  if (g.size() > kMaxGraphNodes) {
    throw ContractViolation("graph " + std::to_string(g.graph_id) + " has " +
                            std::to_string(g.size()) + " nodes (limit " +
                            std::to_string(kMaxGraphNodes) + ")");
  }
  if (g.X.cols() != input_dim) {
    throw ContractViolation("graph " + std::to_string(g.graph_id) +
                            " feature width does not match the model");
  }
}

// Laplacian smoothness only sees the edge weights.
Eigen::MatrixXd laplacian_of(const Eigen::MatrixXd& Wg) {
  Eigen::MatrixXd L = -Wg;
  L.diagonal() += Wg.rowwise().sum();
  return L;
}

Eigen::MatrixXd normalized_weights(const Eigen::MatrixXd& Wg) {
  const double peak = Wg.maxCoeff();
  return peak > 0.0 ? Eigen::MatrixXd(Wg / peak) : Eigen::MatrixXd(Wg);
}

void write_i32(std::ostream& out, std::int32_t v) {
  auto u = static_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                        static_cast<unsigned char>(u >> 16),
                        static_cast<unsigned char>(u >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::int32_t read_i32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated weight file");
  return static_cast<std::int32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                   (static_cast<std::uint32_t>(b[3]) << 24));
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated weight file");
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
  return std::bit_cast<double>(u);
}

}  // namespace

Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw ContractViolation("adjacency is not square");
  if (A.size() > 0 && (A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ContractViolation("adjacency is not symmetric");
  }
  if (A.size() > 0 && A.diagonal().cwiseAbs().maxCoeff() > 0.0) {
    throw ContractViolation("adjacency has a nonzero diagonal");
  }
  Eigen::MatrixXd tilde = A;
  tilde.diagonal().array() += 1.0;
  const Eigen::VectorXd inv_sqrt = tilde.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden sizes must be >= 1");
}

ModelWeights ModelWeights::glorot(int input_dim, int hidden1, int hidden2,
                                  std::uint64_t seed) {
  ModelWeights w = zeros(input_dim, hidden1, hidden2);
  std::mt19937_64 rng(seed);
  fill_glorot(w.W0, rng);
  fill_glorot(w.W1, rng);
  fill_glorot(w.V0, rng);
  fill_glorot(w.V1, rng);
  return w;
}

ModelWeights ModelWeights::zeros(int input_dim, int hidden1, int hidden2) {
  return {Eigen::MatrixXd::Zero(input_dim, hidden1),
          Eigen::MatrixXd::Zero(hidden1, hidden2),
          Eigen::MatrixXd::Zero(hidden2, hidden1),
          Eigen::MatrixXd::Zero(hidden1, input_dim)};
}

bool ModelWeights::all_finite() const {
  return W0.allFinite() && W1.allFinite() && V0.allFinite() && V1.allFinite();
}

ForwardPass forward(const WindowGraph& graph, const ModelWeights& weights) {
  check_graph(graph, weights.input_dim());
  ForwardPass f;
  f.norm_adj = normalize_adjacency(graph.Wg);
  f.enc_pre = f.norm_adj * (graph.X * weights.W0);
  f.enc_hidden = relu(f.enc_pre);
  f.Z = f.norm_adj * (f.enc_hidden * weights.W1);
  f.dec_pre = f.norm_adj * (f.Z * weights.V0);
  f.dec_hidden = relu(f.dec_pre);
  f.X_rec = f.norm_adj * (f.dec_hidden * weights.V1);
  f.logits = f.dec_hidden * f.dec_hidden.transpose();
  f.A_rec = (1.0 + (-f.logits.array()).exp()).inverse().matrix();
  if (!f.Z.allFinite() || !f.X_rec.allFinite()) {
    throw NumericalError("non-finite activations in graph " +
                         std::to_string(graph.graph_id));
  }
  return f;
}

Eigen::MatrixXd encode(const WindowGraph& graph, const ModelWeights& weights) {
  check_graph(graph, weights.input_dim());
  const Eigen::MatrixXd adj = normalize_adjacency(graph.Wg);
  Eigen::MatrixXd Z = adj * (relu(adj * (graph.X * weights.W0)) * weights.W1);
  if (!Z.allFinite()) {
    throw NumericalError("non-finite embedding in graph " + std::to_string(graph.graph_id));
  }
  return Z;
}

Reconstruction decode(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& norm_adj,
                      const ModelWeights& weights) {
  const Eigen::MatrixXd hidden = relu(norm_adj * (Z * weights.V0));
  Reconstruction r;
  r.X_rec = norm_adj * (hidden * weights.V1);
  const Eigen::MatrixXd logits = hidden * hidden.transpose();
  r.A_rec = (1.0 + (-logits.array()).exp()).inverse().matrix();
  if (!r.X_rec.allFinite()) throw NumericalError("non-finite reconstruction");
  return r;
}

LossBreakdown loss(const WindowGraph& graph, const Eigen::MatrixXd& X_rec,
                   const Eigen::MatrixXd& A_rec, const Eigen::MatrixXd& Z,
                   double lambda) {
  const auto n = graph.size();
  LossBreakdown out;
  out.feature = (X_rec - graph.X).squaredNorm() / static_cast<double>(X_rec.size());

  double bce = 0.0;
  double wmse = 0.0;
  std::size_t edge_pairs = 0;
  const Eigen::MatrixXd target_w = normalized_weights(graph.Wg);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = A_rec(i, j);
      const bool linked = i == j || graph.A(i, j) != 0.0;
      bce -= linked ? safe_log(r) : safe_log(1.0 - r);
      if (graph.A(i, j) != 0.0) {
        const double d = r - target_w(i, j);
        wmse += d * d;
        ++edge_pairs;
      }
    }
  }
  out.adjacency = bce / static_cast<double>(n * n);
  out.weight = edge_pairs ? wmse / static_cast<double>(edge_pairs) : 0.0;
  out.smoothness = (Z.transpose() * laplacian_of(graph.Wg) * Z).trace() /
                   static_cast<double>(n);
  out.total = out.feature + out.adjacency + out.weight + lambda * out.smoothness;
  return out;
}

ModelWeights gradients(const WindowGraph& graph, const ModelWeights& weights,
                       double lambda, LossBreakdown* breakdown) {
  const ForwardPass f = forward(graph, weights);
  const auto n = graph.size();
  const double nn = static_cast<double>(n * n);
  if (breakdown) *breakdown = loss(graph, f.X_rec, f.A_rec, f.Z, lambda);

  const Eigen::MatrixXd& adj = f.norm_adj;
  ModelWeights g;

  // Feature reconstruction.
  const Eigen::MatrixXd d_xrec =
      (2.0 / static_cast<double>(f.X_rec.size())) * (f.X_rec - graph.X);
  const Eigen::MatrixXd adj_hd = adj * f.dec_hidden;
  g.V1 = adj_hd.transpose() * d_xrec;
  Eigen::MatrixXd d_hd = adj * (d_xrec * weights.V1.transpose());

  // Adjacency BCE and edge-weight MSE, both through the logits.
  Eigen::MatrixXd target = graph.A;
  target.diagonal().setOnes();
  Eigen::MatrixXd d_logits = (f.A_rec - target) / nn;
  const Eigen::Index edge_pairs = static_cast<Eigen::Index>(graph.A.sum());
  if (edge_pairs > 0) {
    const Eigen::MatrixXd target_w = normalized_weights(graph.Wg);
    const Eigen::ArrayXXd r = f.A_rec.array();
    d_logits.array() += graph.A.array() * 2.0 * (r - target_w.array()) * r * (1.0 - r) /
                        static_cast<double>(edge_pairs);
  }
  // logits = H Hᵀ and d_logits is symmetric.
  d_hd += 2.0 * d_logits * f.dec_hidden;

  const Eigen::MatrixXd d_dec_pre = d_hd.cwiseProduct(relu_mask(f.dec_pre));
  const Eigen::MatrixXd adj_z = adj * f.Z;
  g.V0 = adj_z.transpose() * d_dec_pre;
  Eigen::MatrixXd d_z = adj * (d_dec_pre * weights.V0.transpose());
  d_z += (2.0 * lambda / static_cast<double>(n)) * (laplacian_of(graph.Wg) * f.Z);

  const Eigen::MatrixXd adj_h1 = adj * f.enc_hidden;
  g.W1 = adj_h1.transpose() * d_z;
  const Eigen::MatrixXd d_h1 = adj * (d_z * weights.W1.transpose());
  const Eigen::MatrixXd d_enc_pre = d_h1.cwiseProduct(relu_mask(f.enc_pre));
  g.W0 = (adj * graph.X).transpose() * d_enc_pre;
  return g;
}

TrainResult train(const GraphSet& graphs, const TrainConfig& cfg) {
  cfg.validate();
  if (graphs.empty()) throw ContractViolation("cannot train on an empty graph set");
  const int dim = static_cast<int>(graphs.front().X.cols());
  TrainResult result;
  result.weights = ModelWeights::glorot(dim, cfg.hidden1, cfg.hidden2, cfg.seed);
  auto& w = result.weights;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& graph : graphs) {
      LossBreakdown b;
      ModelWeights g = gradients(graph, w, cfg.lambda, &b);
      if (!std::isfinite(b.total) || b.total > 1e6) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                   " on graph " + std::to_string(graph.graph_id),
                               epoch);
      }
      sum += b.total;
      w.W0 -= cfg.learning_rate * g.W0;
      w.W1 -= cfg.learning_rate * g.W1;
      w.V0 -= cfg.learning_rate * g.V0;
      w.V1 -= cfg.learning_rate * g.V1;
    }
    if (!w.all_finite()) {
      throw TrainingDiverged("non-finite weights at epoch " + std::to_string(epoch), epoch);
    }
    result.loss_trace.push_back(sum / static_cast<double>(graphs.size()));
  }
  return result;
}

NodeEmbeddings embed_all(const GraphSet& graphs, const ModelWeights& weights) {
  Eigen::Index total = 0;
  for (const auto& g : graphs) total += g.size();
  NodeEmbeddings out;
  out.Z.resize(total, weights.hidden2());
  out.rows.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (const auto& g : graphs) {
    const Eigen::MatrixXd Z = encode(g, weights);
    out.Z.middleRows(row, Z.rows()) = Z;
    row += Z.rows();
    for (const auto& node : g.nodes) {
      out.rows.push_back({g.graph_id, node.node_index, node.line_no, node.label});
    }
  }
  return out;
}

void write_weights(const std::filesystem::path& path, const ModelWeights& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("DGAE1", 5);
  write_i32(out, w.input_dim());
  write_i32(out, w.hidden1());
  write_i32(out, w.hidden2());
  for (const auto* m : {&w.W0, &w.W1, &w.V0, &w.V1}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) write_f64(out, (*m)(r, c));
    }
  }
}

ModelWeights read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, "DGAE1", 5) != 0) {
    throw FormatError(path.string() + ": bad magic");
  }
  const int d = read_i32(in), h1 = read_i32(in), h2 = read_i32(in);
  if (d <= 0 || h1 <= 0 || h2 <= 0) throw FormatError(path.string() + ": bad shape");
  ModelWeights w = ModelWeights::zeros(d, h1, h2);
  for (auto* m : {&w.W0, &w.W1, &w.V0, &w.V1}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = read_f64(in);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes");
  }
  return w;
}

void write_loss_trace(const std::filesystem::path& path,
                      const std::vector<double>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, trace[i]);
    out << buf;
  }
}

std::vector<double> read_loss_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> trace;
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    trace.push_back(std::stod(line.substr(comma + 1)));
  }
  return trace;
}

}  // namespace logloom
