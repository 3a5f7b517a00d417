#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace logloom {

// Eigenpairs sorted by ascending eigenvalue; column i of `vectors` pairs with
// values[i]. Each vector's first entry with |x| > 1e-12 is made positive.
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int iterations = 0;  // sweeps (Jacobi) or restarts (Lanczos)
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// tol * max(1, ||S||_F). Throws EigenFailure after max_sweeps.
EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& S, double tol = 1e-10,
                                int max_sweeps = 100);

struct LanczosOptions {
  int krylov_dim = 300;
  int max_restarts = 200;
  double tol = 1e-9;  // residual bound ||Mq - θq||
  std::uint64_t seed = 0x5eed;
};

// k smallest eigenpairs of a sparse symmetric matrix: explicitly restarted
// Lanczos with full reorthogonalization and locking; the projected
// tridiagonal problems go through jacobi_eigen.
EigenDecomposition lanczos_smallest(const Eigen::SparseMatrix<double>& M, int k,
                                    const LanczosOptions& options = {});

}  // namespace logloom
