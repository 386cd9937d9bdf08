#include "mmsold/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <sstream>

#include "mmsold/error.hpp"

namespace mmsold {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kRankTol = 1e-12;
constexpr double kConditionTol = 1e-12;

void require_square(const MatrixRef& a, const char* what) {
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch,
          std::string(what) + " expects a square matrix");
}

void require_symmetric(const MatrixRef& a, const char* what) {
  require_square(a, what);
  require(asymmetry(a) <= kSymmetryTol, ErrorKind::InvalidArgument,
          std::string(what) + " expects a symmetric matrix");
}

}  // namespace

bool all_finite(const MatrixRef& m) { return m.allFinite(); }

double asymmetry(const MatrixRef& a) {
  const double norm = a.norm();
  if (norm == 0.0) return 0.0;
  return (a - a.transpose()).norm() / norm;
}

Matrix sym(const MatrixRef& a) { return 0.5 * (a + a.transpose()); }

SpdFactorization cholesky(const MatrixRef& a) {
  require_symmetric(a, "cholesky");
  require(a.allFinite(), ErrorKind::InvalidArgument, "cholesky input has non-finite entries");
  Eigen::LLT<Matrix, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite,
                "non-positive pivot; the covariance is degenerate and must be regularized "
                "(see partial whitening)");
  }
  Matrix l = llt.matrixL();
  const double floor = 1e-12 * a.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) * l(i, i) > floor)) {
      throw Error(ErrorKind::NotPositiveDefinite, "pivot below 1e-12 of the largest diagonal entry; the covariance is numerically singular");
    }
  }
  return {Matrix(a), std::move(l)};
}

SymEig sym_eig(const MatrixRef& a) {
  require_symmetric(a, "sym_eig");
  // Eigen reads the lower triangle only; symmetrize so both halves count.
  const Matrix s = sym(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "symmetric eigensolver hit its iteration cap");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

ReducedQr reduced_qr_signfix(const MatrixRef& a) {
  const Eigen::Index p = a.rows();
  const Eigen::Index d = a.cols();
  require(p >= d, ErrorKind::DimensionMismatch, "reduced QR needs rows >= cols");
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(p, d);
  Matrix r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();

  const double threshold = kRankTol * a.norm();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(std::abs(r(j, j)) >= threshold) || r(j, j) == 0.0) {
      std::ostringstream msg;
      msg << "|R(" << j << "," << j << ")| = " << std::abs(r(j, j))
          << " below rank threshold " << threshold << " (collapsed particle configuration)";
      throw Error(ErrorKind::RankDeficient, msg.str());
    }
    if (r(j, j) < 0.0) {
      q.col(j) = -q.col(j);
      r.row(j) = -r.row(j);
    }
  }
  return {std::move(q), std::move(r)};
}

Matrix lyapunov_solve(const MatrixRef& s, const MatrixRef& b) {
  require_symmetric(s, "lyapunov_solve");
  require_symmetric(b, "lyapunov_solve");
  require(s.rows() == b.rows(), ErrorKind::DimensionMismatch, "lyapunov_solve shape mismatch");
  const SymEig eig = sym_eig(s);
  const Eigen::Index d = s.rows();
  const double lo = eig.eigenvalues(0);
  const double hi = eig.eigenvalues(d - 1);
  if (!(lo > 0.0) || lo < kConditionTol * hi) {
    std::ostringstream msg;
    msg << "eigenvalue range [" << lo << ", " << hi << "] of S is too ill-conditioned";
    throw Error(ErrorKind::IllConditioned, msg.str());
  }
  const Matrix& u = eig.eigenvectors;
  Matrix rotated = u.transpose() * sym(b) * u;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      rotated(i, j) /= eig.eigenvalues(i) + eig.eigenvalues(j);
    }
  }
  return sym(u * rotated * u.transpose());
}

}  // namespace mmsold
