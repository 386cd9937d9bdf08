#pragma once

#include <cmath>

#include "mmsold/types.hpp"

namespace mmsold {

/// exp(x), returning 0 directly where exp underflows to 0 anyway (x < -746).
inline double exp_or_zero(double x) { return x < -746.0 ? 0.0 : std::exp(x); }

/// Symmetric positive-definite matrix together with its lower Cholesky factor.
struct SpdFactorization {
  Matrix original;
  Matrix chol;  // lower triangular, original = chol * chol^T
};

struct SymEig {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors;  // columns, orthogonal
};

struct ReducedQr {
  Matrix q;  // P x d, orthonormal columns
  Matrix r;  // d x d, upper triangular with positive diagonal
};

/// Relative asymmetry ||A - A^T||_F / ||A||_F (0 for the zero matrix).
double asymmetry(const MatrixRef& a);

Matrix sym(const MatrixRef& a);

/// Throws NotPositiveDefinite when a pivot is not strictly positive.
SpdFactorization cholesky(const MatrixRef& a);

/// Throws NoConvergence if the iterative eigensolver fails.
SymEig sym_eig(const MatrixRef& a);

/// Reduced QR with diag(R) > 0. Throws RankDeficient when some |R_jj| falls
/// below 1e-12 * ||A||_F.
ReducedQr reduced_qr_signfix(const MatrixRef& a);

/// Solves S X + X S = B for symmetric X given SPD S and symmetric B, in the
/// eigenbasis of S. Throws IllConditioned when
/// min eig(S) < 1e-12 * max eig(S).
Matrix lyapunov_solve(const MatrixRef& s, const MatrixRef& b);

}  // namespace mmsold
