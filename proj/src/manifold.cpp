#include "mmsold/manifold.hpp"

#include <cmath>
#include <sstream>

#include "mmsold/error.hpp"

namespace mmsold {

WhiteningMap::WhiteningMap(Vector mean, Matrix chol) : mean_(std::move(mean)), chol_(std::move(chol)) {
  require(chol_.rows() == chol_.cols() && chol_.rows() == mean_.size(), ErrorKind::DimensionMismatch,
          "whitening map shapes disagree");
  for (Eigen::Index i = 0; i < chol_.rows(); ++i) {
    require(chol_(i, i) > 0.0, ErrorKind::NotPositiveDefinite, "singular Cholesky factor");
  }
  const Eigen::Index d = chol_.rows();
  Matrix inv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  chol_inv_t_ = inv.transpose();
}

Matrix WhiteningMap::whiten(const MatrixRef& z) const {
  require(z.cols() == mean_.size(), ErrorKind::DimensionMismatch, "whiten: dimension mismatch");
  return (z.rowwise() - mean_.transpose()) * chol_inv_t_;
}

Matrix WhiteningMap::unwhiten(const MatrixRef& y) const {
  require(y.cols() == mean_.size(), ErrorKind::DimensionMismatch, "unwhiten: dimension mismatch");
  Matrix z = y * chol_.transpose();
  z.rowwise() += mean_.transpose();
  return z;
}

Matrix WhiteningMap::pullback_gradient(const MatrixRef& g_z) const {
  require(g_z.cols() == chol_.rows(), ErrorKind::DimensionMismatch, "pullback: dimension mismatch");
  return g_z * chol_;
}

ConstraintResidual constraint_residual(const MatrixRef& y) {
  const double p = static_cast<double>(y.rows());
  ConstraintResidual r;
  r.mean = y.colwise().sum().cwiseAbs().maxCoeff();
  r.gram = (y.transpose() * y - p * Matrix::Identity(y.cols(), y.cols())).norm();
  return r;
}

bool satisfies_constraints(const MatrixRef& y) {
  if (!y.allFinite()) return false;
  const double p = static_cast<double>(y.rows());
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const ConstraintResidual r = constraint_residual(y);
  return r.mean <= 1e-8 * std::sqrt(p) * scale && r.gram <= 1e-6 * p;
}

ManifoldPoint::ManifoldPoint(Matrix y) : y_(std::move(y)) {
  std::ostringstream msg;
  if (y_.rows() < y_.cols() + 1) {
    msg << "P = " << y_.rows() << " particles cannot match moments in d = " << y_.cols()
        << " (need P >= d + 1)";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  if (!satisfies_constraints(y_)) {
    const auto r = constraint_residual(y_);
    msg << "matrix is off the constraint set (mean residual " << r.mean << ", Gram residual "
        << r.gram << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

bool ManifoldPoint::on_manifold() const { return satisfies_constraints(y_); }

Matrix project_centered(const MatrixRef& a) {
  const double p = static_cast<double>(a.rows());
  const RowVector col_mean = a.colwise().sum() / p;
  return a.rowwise() - col_mean;
}

Matrix project_tangent(const ManifoldPoint& point, const MatrixRef& a) {
  const Matrix& y = point.matrix();
  require(a.rows() == y.rows() && a.cols() == y.cols(), ErrorKind::DimensionMismatch,
          "project_tangent: shape mismatch");
  const double p = static_cast<double>(y.rows());
  Matrix centered = project_centered(a);
  const Matrix s = sym(y.transpose() * centered / p);
  centered.noalias() -= y * s;
  return centered;
}

ManifoldPoint retract(const MatrixRef& y_tilde) {
  require(y_tilde.rows() >= y_tilde.cols() + 1, ErrorKind::InvalidArgument,
          "retraction needs P >= d + 1 particles");
  require(y_tilde.allFinite(), ErrorKind::NonFiniteState, "retraction input has non-finite entries");
  const ReducedQr qr = reduced_qr_signfix(project_centered(y_tilde));
  const double root_p = std::sqrt(static_cast<double>(y_tilde.rows()));
  return ManifoldPoint(root_p * qr.q, ManifoldPoint::Unchecked{});
}

}  // namespace mmsold
