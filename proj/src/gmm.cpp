#include "mmsold/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "mmsold/error.hpp"
#include "mmsold/parallel.hpp"

namespace mmsold {

TrainingSet::TrainingSet(Matrix points) : points_(std::move(points)) {
  require(points_.rows() >= 1 && points_.cols() >= 1, ErrorKind::InvalidArgument,
          "training set needs at least one point of dimension >= 1");
  require(points_.allFinite(), ErrorKind::InvalidArgument, "training set has non-finite entries");
  const double n = static_cast<double>(points_.rows());
  mean_ = points_.colwise().sum().transpose() / n;
  const Matrix centered = points_.rowwise() - mean_.transpose();
  cov_ = sym(centered.transpose() * centered / n);
  try {
    chol_ = mmsold::cholesky(cov_);
  } catch (const Error&) {
    chol_.reset();
  }
}

const SpdFactorization& TrainingSet::cholesky() const {
  if (!chol_) {
    throw Error(ErrorKind::NotPositiveDefinite,
                "training covariance is not positive-definite; apply partial whitening "
                "or remove degenerate directions before sampling");
  }
  return *chol_;
}

void SmoothingConfig::validate() const {
  require(delta > 0.0 && std::isfinite(delta), ErrorKind::InvalidArgument, "delta must be > 0");
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::InvalidArgument, "sigma must be >= 0");
  require(mc_samples >= 2 && mc_samples % 2 == 0, ErrorKind::InvalidArgument,
          "mc_samples must be even and >= 2");
}

namespace {

// Logits -||y - x_i||^2 / (2 delta^2) and their maximum; excluded index gets -inf.
double fill_logits(const Matrix& x, double delta, const VectorRef& y, Exclude exclude,
                   std::vector<double>& logits) {
  const Eigen::Index n = x.rows();
  logits.resize(static_cast<std::size_t>(n));
  const double scale = -0.5 / (delta * delta);
  const Eigen::Index d = x.cols();
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (exclude && *exclude == i) {
      logits[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double l = scale * squared_distance(x.data() + i * d, y.data(), d);
    logits[i] = l;
    if (l > best) best = l;
  }
  return best;
}

void require_mixture(const TrainingSet& ts, Exclude exclude, Eigen::Index dim) {
  require(dim == ts.dim(), ErrorKind::DimensionMismatch, "query dimension differs from data");
  if (exclude) {
    require(*exclude >= 0 && *exclude < ts.size(), ErrorKind::InvalidArgument,
            "excluded index out of range");
    require(ts.size() >= 2, ErrorKind::InvalidArgument,
            "leave-one-out mixture is empty for a single training point");
  }
}

double log_density(const TrainingSet& ts, double delta, const VectorRef& y, Exclude exclude,
                   std::vector<double>& logits) {
  const double best = fill_logits(ts.points(), delta, y, exclude, logits);
  double sum = 0.0;
  for (double l : logits) sum += exp_or_zero(l - best);
  const double count = static_cast<double>(ts.size() - (exclude ? 1 : 0));
  const double d = static_cast<double>(ts.dim());
  return best + std::log(sum) - std::log(count) -
         0.5 * d * std::log(2.0 * std::numbers::pi * delta * delta);
}

void posterior_mean(const TrainingSet& ts, double delta, const VectorRef& y, Exclude exclude,
                    std::vector<double>& logits, Eigen::Ref<Vector> out) {
  const double best = fill_logits(ts.points(), delta, y, exclude, logits);
  require(std::isfinite(best), ErrorKind::DegenerateDenominator,
          "softmax denominator vanished at a non-finite query");
  const Matrix& x = ts.points();
  const Eigen::Index d = x.cols();
  out.setZero();
  double* acc = out.data();
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double w = exp_or_zero(logits[i] - best);
    if (w == 0.0) continue;
    total += w;
    const double* row = x.data() + i * d;
    for (Eigen::Index j = 0; j < d; ++j) acc[j] += w * row[j];
  }
  out /= total;
}

}  // namespace

double gmm_log_density(const TrainingSet& ts, double delta, const VectorRef& z, Exclude exclude) {
  require(delta > 0.0, ErrorKind::InvalidArgument, "delta must be > 0");
  require_mixture(ts, exclude, z.size());
  std::vector<double> logits;
  return log_density(ts, delta, z, exclude, logits);
}

Vector gmm_posterior_mean(const TrainingSet& ts, double delta, const VectorRef& z,
                          Exclude exclude) {
  require(delta > 0.0, ErrorKind::InvalidArgument, "delta must be > 0");
  require_mixture(ts, exclude, z.size());
  std::vector<double> logits;
  Vector c(z.size());
  posterior_mean(ts, delta, z, exclude, logits, c);
  return c;
}

Vector gmm_score(const TrainingSet& ts, double delta, const VectorRef& z, Exclude exclude) {
  return (gmm_posterior_mean(ts, delta, z, exclude) - z) / (delta * delta);
}

Matrix draw_smoothing_noise(const SmoothingConfig& cfg, Eigen::Index dim, Stream& rng) {
  Matrix noise(cfg.pairs(), dim);
  rng.fill_normal(noise);
  return noise;
}

Vector smoothed_score_with_noise(const TrainingSet& ts, double delta, double sigma,
                                 const VectorRef& z, const MatrixRef& noise, Exclude exclude) {
  require(delta > 0.0, ErrorKind::InvalidArgument, "delta must be > 0");
  require_mixture(ts, exclude, z.size());
  if (sigma == 0.0) return -gmm_score(ts, delta, z, exclude);
  require(noise.rows() >= 1 && noise.cols() == z.size(), ErrorKind::DimensionMismatch,
          "noise rows must match the query dimension");

  std::vector<double> logits;
  const Eigen::Index d = z.size();
  Vector y(d), c(d), acc = Vector::Zero(d);
  for (Eigen::Index r = 0; r < noise.rows(); ++r) {
    y = z + sigma * noise.row(r).transpose();
    posterior_mean(ts, delta, y, exclude, logits, c);
    acc += c;
    y = z - sigma * noise.row(r).transpose();
    posterior_mean(ts, delta, y, exclude, logits, c);
    acc += c;
  }
  // (1/M) sum [y+ - c(y+) + y- - c(y-)] with y+ + y- = 2z.
  const double m = 2.0 * static_cast<double>(noise.rows());
  return (z - acc / m) / (delta * delta);
}

double smoothed_potential_with_noise(const TrainingSet& ts, double delta, double sigma,
                                     const VectorRef& z, const MatrixRef& noise,
                                     Exclude exclude) {
  require(delta > 0.0, ErrorKind::InvalidArgument, "delta must be > 0");
  require_mixture(ts, exclude, z.size());
  std::vector<double> logits;
  if (sigma == 0.0) return -log_density(ts, delta, z, exclude, logits);
  require(noise.rows() >= 1 && noise.cols() == z.size(), ErrorKind::DimensionMismatch,
          "noise rows must match the query dimension");
  Vector y(z.size());
  double acc = 0.0;
  for (Eigen::Index r = 0; r < noise.rows(); ++r) {
    y = z + sigma * noise.row(r).transpose();
    acc += log_density(ts, delta, y, exclude, logits);
    y = z - sigma * noise.row(r).transpose();
    acc += log_density(ts, delta, y, exclude, logits);
  }
  return -acc / (2.0 * static_cast<double>(noise.rows()));
}

Vector smoothed_score(const TrainingSet& ts, const SmoothingConfig& cfg, const VectorRef& z,
                      Stream& rng, Exclude exclude) {
  cfg.validate();
  if (cfg.sigma == 0.0) return -gmm_score(ts, cfg.delta, z, exclude);
  const Matrix noise = draw_smoothing_noise(cfg, z.size(), rng);
  return smoothed_score_with_noise(ts, cfg.delta, cfg.sigma, z, noise, exclude);
}

double smoothed_potential(const TrainingSet& ts, const SmoothingConfig& cfg, const VectorRef& z,
                          Stream& rng, Exclude exclude) {
  cfg.validate();
  if (cfg.sigma == 0.0) return -gmm_log_density(ts, cfg.delta, z, exclude);
  const Matrix noise = draw_smoothing_noise(cfg, z.size(), rng);
  return smoothed_potential_with_noise(ts, cfg.delta, cfg.sigma, z, noise, exclude);
}

Matrix score_batch(const TrainingSet& ts, const SmoothingConfig& cfg, const MatrixRef& z,
                   const SubstreamKey& key, unsigned threads,
                   std::span<const std::uint64_t> stream_ids) {
  cfg.validate();
  require(z.cols() == ts.dim(), ErrorKind::DimensionMismatch, "particle dimension differs from data");
  require(stream_ids.empty() || stream_ids.size() == static_cast<std::size_t>(z.rows()),
          ErrorKind::DimensionMismatch, "one stream id per row required");
  Matrix out(z.rows(), z.cols());
  parallel_for(static_cast<std::size_t>(z.rows()), threads, [&](std::size_t i) {
    const std::uint64_t id = stream_ids.empty() ? i : stream_ids[i];
    Stream rng = key.at(id);
    out.row(static_cast<Eigen::Index>(i)) =
        smoothed_score(ts, cfg, z.row(static_cast<Eigen::Index>(i)).transpose(), rng).transpose();
  });
  return out;
}

}  // namespace mmsold
