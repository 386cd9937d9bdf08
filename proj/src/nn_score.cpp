#include "mmsold/nn_score.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "mmsold/error.hpp"

namespace mmsold {

NeighborIndex::NeighborIndex(const TrainingSet& ts) : ts_(&ts) {}

NeighborIndex build_index(const TrainingSet& ts) { return NeighborIndex(ts); }

std::vector<Eigen::Index> NeighborIndex::query(const VectorRef& z, Eigen::Index k) const {
  const Matrix& x = ts_->points();
  require(z.size() == x.cols(), ErrorKind::DimensionMismatch, "query dimension differs from data");
  require(k >= 1 && k <= x.rows(), ErrorKind::InvalidBudget, "K must lie in [1, N]");
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    dist[i] = {(x.row(i).transpose() - z).squaredNorm(), i};
  }
  // Pair ordering is (distance, index): ties resolve to the smaller index.
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<Eigen::Index> out(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

LocalSubset select_local_subset(const NeighborIndex& idx, const VectorRef& z, Eigen::Index k,
                                Eigen::Index l, Stream& rng) {
  const TrainingSet& ts = idx.training();
  const Eigen::Index n = ts.size();
  if (k < 1 || l < 0 || k + l > n) {
    std::ostringstream msg;
    msg << "K=" << k << ", L=" << l << " invalid for N=" << n << " (need K>=1, L>=0, K+L<=N)";
    throw Error(ErrorKind::InvalidBudget, msg.str());
  }
  LocalSubset subset;
  subset.nearest = idx.query(z, k);

  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  for (auto i : subset.nearest) taken[i] = 1;
  std::vector<Eigen::Index> complement;
  complement.reserve(static_cast<std::size_t>(n - k));
  for (Eigen::Index i = 0; i < n; ++i)
    if (!taken[i]) complement.push_back(i);

  if (l == n - k) {
    subset.remainder = complement;
  } else if (l > 0) {
    // Partial Fisher-Yates: the first l slots are a uniform l-subset.
    for (Eigen::Index j = 0; j < l; ++j) {
      const auto pick = j + static_cast<Eigen::Index>(rng.below(complement.size() - j));
      std::swap(complement[j], complement[pick]);
    }
    subset.remainder.assign(complement.begin(), complement.begin() + l);
  }

  const double correction = l > 0 ? static_cast<double>(n - k) / static_cast<double>(l) : 1.0;
  std::vector<std::pair<Eigen::Index, double>> merged;
  merged.reserve(static_cast<std::size_t>(k + l));
  for (auto i : subset.nearest) merged.emplace_back(i, 1.0);
  for (auto i : subset.remainder) merged.emplace_back(i, correction);
  std::sort(merged.begin(), merged.end());
  for (const auto& [i, w] : merged) {
    subset.indices.push_back(i);
    subset.weights.push_back(w);
  }

  const Eigen::Index m = k + l;
  if (m < ts.dim()) {
    Matrix local(m, ts.dim());
    for (Eigen::Index a = 0; a < m; ++a) local.row(a) = ts.points().row(subset.indices[a]);
    subset.gram = local * local.transpose();
  }
  return subset;
}

LocalSums local_sums(const TrainingSet& ts, const LocalSubset& subset, double delta,
                     const VectorRef& y) {
  LocalSums sums;
  sums.t1 = Vector::Zero(ts.dim());
  const double scale = -0.5 / (delta * delta);
  for (std::size_t a = 0; a < subset.indices.size(); ++a) {
    const auto row = ts.points().row(subset.indices[a]);
    const double w = subset.weights[a] * std::exp(scale * (row.transpose() - y).squaredNorm());
    sums.t0 += w;
    sums.t1 += w * row.transpose();
  }
  return sums;
}

namespace {

// Weighted local softmax mean sum_a w_a exp(l_a) x_a / sum_a w_a exp(l_a).
void weighted_mean(const TrainingSet& ts, const LocalSubset& subset, const std::vector<double>& logits,
                   Eigen::Ref<Vector> out) {
  double best = -std::numeric_limits<double>::infinity();
  for (double l : logits) best = std::max(best, l);
  if (!std::isfinite(best)) {
    throw Error(ErrorKind::DegenerateDenominator,
                "local softmax denominator vanished (query far outside the data support)");
  }
  const Eigen::Index d = ts.dim();
  out.setZero();
  double* acc = out.data();
  double total = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    const double w = subset.weights[a] * exp_or_zero(logits[a] - best);
    if (w == 0.0) continue;
    total += w;
    const double* row = ts.points().row(subset.indices[a]).data();
    for (Eigen::Index j = 0; j < d; ++j) acc[j] += w * row[j];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::DegenerateDenominator, "local softmax denominator underflowed to 0");
  }
  out /= total;
}

Matrix local_points(const TrainingSet& ts, const LocalSubset& subset) {
  Matrix local(static_cast<Eigen::Index>(subset.indices.size()), ts.dim());
  for (Eigen::Index a = 0; a < local.rows(); ++a) local.row(a) = ts.points().row(subset.indices[a]);
  return local;
}

Matrix gram_factor(const Matrix& gram) {
  const Eigen::Index m = gram.rows();
  const double jitter = 1e-10 * gram.trace() / static_cast<double>(m);
  Matrix jittered = gram;
  jittered.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(jittered);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "Gram matrix of local points is not usable");
  }
  return llt.matrixL();
}

}  // namespace

Vector nn_smoothed_score_on_subset(const TrainingSet& ts, const LocalSubset& subset,
                                   const SmoothingConfig& cfg, const VectorRef& z, Stream& rng,
                                   NnOptions options) {
  cfg.validate();
  const Eigen::Index d = ts.dim();
  const Eigen::Index m = static_cast<Eigen::Index>(subset.indices.size());
  const double scale = -0.5 / (cfg.delta * cfg.delta);
  std::vector<double> logits(static_cast<std::size_t>(m));
  Vector c(d);

  if (cfg.sigma == 0.0) {
    for (Eigen::Index a = 0; a < m; ++a)
      logits[a] = scale * squared_distance(ts.points().row(subset.indices[a]).data(), z.data(), d);
    weighted_mean(ts, subset, logits, c);
    return -((c - z) / (cfg.delta * cfg.delta));
  }

  Vector acc = Vector::Zero(d);
  const bool projected = m < d && !options.force_ambient;
  if (projected) {
    const Matrix factor = gram_factor(subset.gram);
    std::vector<double> base(static_cast<std::size_t>(m));
    for (Eigen::Index a = 0; a < m; ++a)
      base[a] = scale * squared_distance(ts.points().row(subset.indices[a]).data(), z.data(), d);
    const double shift = cfg.sigma / (cfg.delta * cfg.delta);
    Vector xi(m), eta(m);
    for (int r = 0; r < cfg.pairs(); ++r) {
      rng.fill_normal(xi);
      eta = factor * xi;
      for (Eigen::Index a = 0; a < m; ++a) logits[a] = base[a] + shift * eta(a);
      weighted_mean(ts, subset, logits, c);
      acc += c;
      for (Eigen::Index a = 0; a < m; ++a) logits[a] = base[a] - shift * eta(a);
      weighted_mean(ts, subset, logits, c);
      acc += c;
    }
  } else {
    Vector eps(d), y(d);
    for (int r = 0; r < cfg.pairs(); ++r) {
      rng.fill_normal(eps);
      for (int sign : {1, -1}) {
        y = z + static_cast<double>(sign) * cfg.sigma * eps;
        for (Eigen::Index a = 0; a < m; ++a)
          logits[a] = scale * squared_distance(ts.points().row(subset.indices[a]).data(), y.data(), d);
        weighted_mean(ts, subset, logits, c);
        acc += c;
      }
    }
  }
  // y+ + y- = 2z for every pair, so the ambient parts of the noise cancel.
  return (z - acc / static_cast<double>(2 * cfg.pairs())) / (cfg.delta * cfg.delta);
}

Vector nn_smoothed_score(const TrainingSet& ts, const NeighborIndex& idx,
                         const SmoothingConfig& cfg, Eigen::Index k, Eigen::Index l,
                         const VectorRef& z, Stream& rng, NnOptions options) {
  cfg.validate();
  const LocalSubset subset = select_local_subset(idx, z, k, l, rng);
  return nn_smoothed_score_on_subset(ts, subset, cfg, z, rng, options);
}

Vector sample_logit_perturbation(const TrainingSet& ts, const LocalSubset& subset,
                                 const SmoothingConfig& cfg, bool ambient, Stream& rng) {
  const Eigen::Index m = static_cast<Eigen::Index>(subset.indices.size());
  const double shift = cfg.sigma / (cfg.delta * cfg.delta);
  Vector eta(m);
  if (ambient) {
    Vector eps(ts.dim());
    rng.fill_normal(eps);
    eta = local_points(ts, subset) * eps;
  } else {
    require(subset.gram.rows() == m, ErrorKind::InvalidArgument,
            "projected sampling needs the Gram matrix (K + L < d)");
    Vector xi(m);
    rng.fill_normal(xi);
    eta = gram_factor(subset.gram) * xi;
  }
  return shift * eta;
}

}  // namespace mmsold
