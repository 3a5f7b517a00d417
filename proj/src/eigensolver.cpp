#include "logloom/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& A) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      if (i != j) s += A(i, j) * A(i, j);
    }
  }
  return std::sqrt(s);
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

EigenDecomposition sorted(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors,
                          int iterations) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  EigenDecomposition out;
  out.values.resize(values.size());
  out.vectors.resize(vectors.rows(), values.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out.values[c] = values[order[i]];
    out.vectors.col(c) = vectors.col(order[i]);
    fix_sign(out.vectors.col(c));
  }
  out.iterations = iterations;
  return out;
}

Eigen::VectorXd random_unit(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  }
  return v.normalized();
}

// Two passes of classical Gram-Schmidt against the first `cols` columns.
void orthogonalize(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, Eigen::Index cols) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd coeff = basis.leftCols(cols).transpose() * w;
    w.noalias() -= basis.leftCols(cols) * coeff;
  }
}

}  // namespace

EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& S, double tol, int max_sweeps) {
  if (S.rows() != S.cols()) throw ContractViolation("jacobi_eigen needs a square matrix");
  const Eigen::Index n = S.rows();
  Eigen::MatrixXd A = 0.5 * (S + S.transpose());
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
  const double threshold = tol * std::max(1.0, A.norm());

  int sweep = 0;
  while (off_diagonal_norm(A) >= threshold) {
    if (sweep == max_sweeps) {
      throw EigenFailure("Jacobi did not converge in " + std::to_string(max_sweeps) +
                         " sweeps");
    }
    ++sweep;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = A(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return sorted(A.diagonal(), V, sweep);
}

EigenDecomposition lanczos_smallest(const Eigen::SparseMatrix<double>& M, int k,
                                    const LanczosOptions& options) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n) throw ContractViolation("lanczos_smallest needs a square matrix");
  if (k < 1 || k > n) throw ContractViolation("lanczos_smallest: k out of range");

  std::mt19937_64 rng(options.seed);
  double scale = 0.0;
  for (int c = 0; c < M.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(M, c); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  scale = std::max(1.0, scale);
  const double tol = options.tol * scale;

  Eigen::MatrixXd locked(n, k);
  std::vector<double> locked_values;
  Eigen::VectorXd start = random_unit(n, rng);

  int restart = 0;
  for (; restart < options.max_restarts && static_cast<int>(locked_values.size()) < k;
       ++restart) {
    const auto nlocked = static_cast<Eigen::Index>(locked_values.size());
    const Eigen::Index dim =
        std::min<Eigen::Index>(options.krylov_dim, n - nlocked);

    Eigen::VectorXd v = start;
    orthogonalize(v, locked, nlocked);
    if (v.norm() < 1e-8) {
      v = random_unit(n, rng);
      orthogonalize(v, locked, nlocked);
    }
    v.normalize();

    Eigen::MatrixXd basis(n, dim);
    std::vector<double> alpha, beta;
    Eigen::Index steps = 0;
    bool invariant = false;
    for (Eigen::Index j = 0; j < dim; ++j) {
      basis.col(j) = v;
      Eigen::VectorXd w = M * v;
      const double a = v.dot(w);
      alpha.push_back(a);
      w -= a * v;
      if (j > 0) w -= beta.back() * basis.col(j - 1);
      orthogonalize(w, basis, j + 1);
      orthogonalize(w, locked, nlocked);
      const double b = w.norm();
      steps = j + 1;
      if (b < 1e-12 * scale) {
        invariant = true;
        break;
      }
      beta.push_back(b);
      v = w / b;
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
    for (Eigen::Index j = 0; j < steps; ++j) {
      T(j, j) = alpha[static_cast<std::size_t>(j)];
      if (j + 1 < steps) {
        T(j, j + 1) = T(j + 1, j) = beta[static_cast<std::size_t>(j)];
      }
    }
    const EigenDecomposition ritz = jacobi_eigen(T, 1e-14, 200);
    const double tail = invariant ? 0.0 : beta.back();

    Eigen::Index first_open = -1;
    for (Eigen::Index i = 0; i < steps; ++i) {
      if (static_cast<int>(locked_values.size()) == k) break;
      const double residual = std::abs(tail * ritz.vectors(steps - 1, i));
      if (residual >= tol) {
        first_open = i;
        break;
      }
      Eigen::VectorXd u = basis.leftCols(steps) * ritz.vectors.col(i);
      orthogonalize(u, locked, static_cast<Eigen::Index>(locked_values.size()));
      if (u.norm() < 1e-8) continue;
      locked.col(static_cast<Eigen::Index>(locked_values.size())) = u.normalized();
      locked_values.push_back(ritz.values[i]);
    }
    if (first_open >= 0) {
      start = basis.leftCols(steps) * ritz.vectors.col(first_open);
    } else {
      start = random_unit(n, rng);
    }
  }
  if (static_cast<int>(locked_values.size()) < k) {
    throw EigenFailure("Lanczos found " + std::to_string(locked_values.size()) + " of " +
                       std::to_string(k) + " eigenpairs in " +
                       std::to_string(options.max_restarts) + " restarts");
  }

  // Rayleigh quotients of the locked vectors are the reported eigenvalues.
  Eigen::VectorXd values(k);
  for (int i = 0; i < k; ++i) {
    values[i] = locked.col(i).dot(M * locked.col(i));
  }
  return sorted(values, locked, restart);
}

}  // namespace logloom
