#pragma once

#include "mmsold/numerics.hpp"
#include "mmsold/types.hpp"

namespace mmsold {

/// Affine map between data coordinates Z and whitened coordinates
/// Y = (Z - 1 mu^T) L^{-T}, where Sigma = L L^T.
class WhiteningMap {
 public:
  WhiteningMap(Vector mean, Matrix chol);

  Matrix whiten(const MatrixRef& z) const;
  Matrix unwhiten(const MatrixRef& y) const;
  /// Row-stacked gradient pulled back to Y coordinates: G_Z L.
  Matrix pullback_gradient(const MatrixRef& g_z) const;

  const Vector& mean() const { return mean_; }
  const Matrix& chol() const { return chol_; }

 private:
  Vector mean_;
  Matrix chol_;
  Matrix chol_inv_t_;  // L^{-T}
};

struct ConstraintResidual {
  double mean = 0.0;  // ||1^T Y||_inf
  double gram = 0.0;  // ||Y^T Y - P I||_F
};

ConstraintResidual constraint_residual(const MatrixRef& y);

/// A P x d matrix with zero column sums and Y^T Y = P I (P >= d + 1).
class ManifoldPoint {
 public:
  /// Validates the constraints; throws InvalidArgument when violated.
  explicit ManifoldPoint(Matrix y);

  const Matrix& matrix() const { return y_; }
  Eigen::Index particles() const { return y_.rows(); }
  Eigen::Index dim() const { return y_.cols(); }

  bool on_manifold() const;
  ConstraintResidual residual() const { return constraint_residual(y_); }

 private:
  struct Unchecked {};
  ManifoldPoint(Matrix y, Unchecked) : y_(std::move(y)) {}
  friend ManifoldPoint retract(const MatrixRef& y_tilde);

  Matrix y_;
};

/// Tolerances for membership: mean residual 1e-8 * sqrt(P) * scale, Gram
/// residual 1e-6 * P.
bool satisfies_constraints(const MatrixRef& y);

/// A - 1 1^T A / P.
Matrix project_centered(const MatrixRef& a);

/// Composite tangent projection Pi_Y = Pi^St_Y o Pi_ctr.
Matrix project_tangent(const ManifoldPoint& y, const MatrixRef& a);

/// Centered reduced QR retraction sqrt(P) Q. Throws RankDeficient when the
/// centered input has collapsed.
ManifoldPoint retract(const MatrixRef& y_tilde);

}  // namespace mmsold
