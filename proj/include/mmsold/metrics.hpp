#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mmsold/random.hpp"
#include "mmsold/types.hpp"

namespace mmsold {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::map<std::string, double> config;  // projections, k, percentile, ...
  Eigen::Index size_a = 0;
  Eigen::Index size_b = 0;
  std::uint64_t seed = 0;
};

/// Squared 1D W2 between two empirical measures (inputs need not be sorted).
double w2_squared_1d(std::vector<double> a, std::vector<double> b);

/// Uniformly random unit directions, one per row.
Matrix random_directions(Eigen::Index count, Eigen::Index dim, Stream& rng);

/// Sliced Wasserstein-2: sqrt of the mean squared 1D W2 over random directions.
double sliced_w2(const MatrixRef& a, const MatrixRef& b, Eigen::Index projections, Stream& rng);

/// Same with explicit directions.
double sliced_w2_with_directions(const MatrixRef& a, const MatrixRef& b, const MatrixRef& directions);

/// Unbiased MMD^2 with k(x, y) = (x^T y / f + 1)^3.
double kid_poly(const MatrixRef& a, const MatrixRef& b);

/// Fraction of test points whose k-th-nearest-other-test-point ball contains
/// a generated point strictly inside.
double recall_knn(const MatrixRef& test, const MatrixRef& generated, int k = 3);

/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Nearest-other-point distance of every row.
std::vector<double> nearest_other_distances(const MatrixRef& points);

/// Fraction of generated points closer to the training set than the p-th
/// percentile of within-training nearest-neighbor distances.
double dup_rate(const MatrixRef& train, const MatrixRef& generated, double p);

}  // namespace mmsold
