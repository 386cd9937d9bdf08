#include "mmsold/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mmsold/error.hpp"

namespace mmsold {

double w2_squared_1d(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::InvalidArgument, "W2 needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == m) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(n);
  }
  // Integrate (F_a^{-1}(u) - F_b^{-1}(u))^2 over the union of quantile breakpoints
  // i/n and j/m, on which both quantile functions are constant. The breakpoints
  // are compared as integers i*m vs j*n to avoid rounding.
  double total = 0.0;
  std::size_t i = 0, j = 0;
  std::size_t prev = 0;  // in units of 1/(n m)
  while (i < n && j < m) {
    const std::size_t next_a = (i + 1) * m;
    const std::size_t next_b = (j + 1) * n;
    const std::size_t next = std::min(next_a, next_b);
    const double diff = a[i] - b[j];
    total += diff * diff * static_cast<double>(next - prev);
    prev = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return total / (static_cast<double>(n) * static_cast<double>(m));
}

Matrix random_directions(Eigen::Index count, Eigen::Index dim, Stream& rng) {
  Matrix dirs(count, dim);
  for (Eigen::Index r = 0; r < count; ++r) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim; ++j) dirs(r, j) = rng.normal();
      norm = dirs.row(r).norm();
    } while (norm == 0.0);
    dirs.row(r) /= norm;
  }
  return dirs;
}

double sliced_w2_with_directions(const MatrixRef& a, const MatrixRef& b, const MatrixRef& directions) {
  require(a.rows() >= 1 && b.rows() >= 1, ErrorKind::InvalidArgument, "SW2 needs non-empty samples");
  require(a.cols() == b.cols() && directions.cols() == a.cols(), ErrorKind::DimensionMismatch,
          "SW2 inputs disagree in dimension");
  require(directions.rows() >= 1, ErrorKind::InvalidArgument, "SW2 needs >= 1 projection");
  const Matrix pa = a * directions.transpose();
  const Matrix pb = b * directions.transpose();
  double acc = 0.0;
  std::vector<double> xa(static_cast<std::size_t>(a.rows())), xb(static_cast<std::size_t>(b.rows()));
  for (Eigen::Index r = 0; r < directions.rows(); ++r) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) xa[i] = pa(i, r);
    for (Eigen::Index i = 0; i < b.rows(); ++i) xb[i] = pb(i, r);
    acc += w2_squared_1d(xa, xb);
  }
  return std::sqrt(acc / static_cast<double>(directions.rows()));
}

double sliced_w2(const MatrixRef& a, const MatrixRef& b, Eigen::Index projections, Stream& rng) {
  require(projections >= 1, ErrorKind::InvalidArgument, "SW2 needs >= 1 projection");
  require(a.cols() == b.cols(), ErrorKind::DimensionMismatch, "SW2 inputs disagree in dimension");
  const Matrix dirs = random_directions(projections, a.cols(), rng);
  return sliced_w2_with_directions(a, b, dirs);
}

double kid_poly(const MatrixRef& a, const MatrixRef& b) {
  require(a.rows() >= 2 && b.rows() >= 2, ErrorKind::InvalidArgument, "KID needs >= 2 samples per set");
  require(a.cols() == b.cols(), ErrorKind::DimensionMismatch, "KID feature dimensions differ");
  const double f = static_cast<double>(a.cols());
  const auto kernel = [f](const Matrix& gram) {
    return ((gram.array() / f + 1.0).cube()).matrix();
  };
  const Matrix kaa = kernel(a * a.transpose());
  const Matrix kbb = kernel(b * b.transpose());
  const Matrix kab = kernel(a * b.transpose());
  const double n = static_cast<double>(a.rows());
  const double m = static_cast<double>(b.rows());
  const double saa = (kaa.sum() - kaa.trace()) / (n * (n - 1.0));
  const double sbb = (kbb.sum() - kbb.trace()) / (m * (m - 1.0));
  return saa + sbb - 2.0 * kab.sum() / (n * m);
}

double recall_knn(const MatrixRef& test, const MatrixRef& generated, int k) {
  require(k >= 1 && test.rows() >= k + 1, ErrorKind::InvalidArgument, "recall needs n >= k + 1 test points");
  require(test.cols() == generated.cols(), ErrorKind::DimensionMismatch, "recall feature dimensions differ");
  const Eigen::Index n = test.rows();
  Eigen::Index covered = 0;
  std::vector<double> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t slot = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dist[slot++] = (test.row(i) - test.row(j)).norm();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    const double radius = dist[static_cast<std::size_t>(k - 1)];
    for (Eigen::Index g = 0; g < generated.rows(); ++g) {
      if ((generated.row(g) - test.row(i)).norm() < radius) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(n);
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), ErrorKind::InvalidArgument, "percentile of an empty set");
  require(p >= 0.0 && p <= 100.0, ErrorKind::InvalidArgument, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> nearest_other_distances(const MatrixRef& points) {
  const Eigen::Index n = points.rows();
  std::vector<double> out(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out[i] = std::min(out[i], (points.row(i) - points.row(j)).norm());
  return out;
}

double dup_rate(const MatrixRef& train, const MatrixRef& generated, double p) {
  require(train.rows() >= 2, ErrorKind::InvalidArgument, "dup rate needs >= 2 training points");
  require(train.cols() == generated.cols(), ErrorKind::DimensionMismatch, "dup rate dimensions differ");
  require(generated.rows() >= 1, ErrorKind::InvalidArgument, "dup rate needs generated points");
  const double tau = percentile(nearest_other_distances(train), p);
  Eigen::Index dup = 0;
  for (Eigen::Index g = 0; g < generated.rows(); ++g) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < train.rows(); ++i) best = std::min(best, (generated.row(g) - train.row(i)).norm());
    if (best < tau) ++dup;
  }
  return static_cast<double>(dup) / static_cast<double>(generated.rows());
}

}  // namespace mmsold
