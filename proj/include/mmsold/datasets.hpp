#pragma once

#include <cstdint>
#include <string>

#include "mmsold/gmm.hpp"
#include "mmsold/numerics.hpp"

namespace mmsold {

enum class Dataset2DKind { Checkerboard, TwoSpirals, Circle };

std::string to_string(Dataset2DKind kind);
Dataset2DKind parse_dataset_kind(const std::string& name);

struct Dataset2DSpec {
  Dataset2DKind kind = Dataset2DKind::Checkerboard;
  Eigen::Index n_samples = 500;
  std::uint64_t seed = 0;
  // checkerboard
  int cells = 4;
  double extent = 4.0;  // board covers [-extent, extent]^2
  // two spirals
  double turns = 2.0;
  double spiral_noise = 0.05;
  // circle
  double radius = 1.0;
  double circle_noise = 0.0;
  bool equispaced = true;
};

/// Dark cells are those with (column + row) even, counted from the lower-left.
bool in_dark_cell(double x, double y, int cells, double extent);

Matrix generate_2d(const Dataset2DSpec& spec);

/// Rectangular numeric CSV. A non-numeric first row is treated as a header.
Matrix load_csv(const std::string& path);
/// Throws DimensionMismatch unless the file has `expected_cols` columns.
Matrix load_csv(const std::string& path, Eigen::Index expected_cols);
Matrix parse_csv(const std::string& text, const std::string& source = "<memory>");

/// 17 significant digits so that load(save(m)) == m bit for bit.
void save_csv(const std::string& path, const MatrixRef& m, const std::string& header = {});
std::string format_csv(const MatrixRef& m, const std::string& header = {});

/// Whitening with the largest `cap_k` covariance eigenvalues capped at the
/// (cap_k + 1)-th largest value.
class PartialWhitening {
 public:
  PartialWhitening(const TrainingSet& ts, int cap_k);

  Matrix forward(const MatrixRef& x) const;
  Matrix inverse(const MatrixRef& y) const;

  const Vector& mean() const { return mean_; }
  const Vector& eigenvalues() const { return eigenvalues_; }  // descending, uncapped
  const Vector& capped() const { return capped_; }            // descending, capped
  const Matrix& eigenvectors() const { return eigenvectors_; }
  int cap_k() const { return cap_k_; }

 private:
  Vector mean_;
  Vector eigenvalues_;
  Vector capped_;
  Matrix eigenvectors_;  // columns match eigenvalues_
  Vector scales_;        // 1 / sqrt(capped + 1e-12)
  int cap_k_;
};

struct PartialWhiteningResult {
  PartialWhitening map;
  TrainingSet transformed;
};

PartialWhiteningResult partial_whiten(const TrainingSet& ts, int cap_k);

}  // namespace mmsold
