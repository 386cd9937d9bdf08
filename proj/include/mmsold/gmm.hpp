#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "mmsold/numerics.hpp"
#include "mmsold/random.hpp"
#include "mmsold/types.hpp"

namespace mmsold {

/// Training points with their empirical moments. The covariance uses the 1/N
/// (population) convention; the tilting estimator relies on it.
class TrainingSet {
 public:
  explicit TrainingSet(Matrix points);

  const Matrix& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

  bool positive_definite() const { return chol_.has_value(); }
  /// Throws NotPositiveDefinite if the covariance is degenerate.
  const SpdFactorization& cholesky() const;

 private:
  Matrix points_;
  Vector mean_;
  Matrix cov_;
  std::optional<SpdFactorization> chol_;
};

struct SmoothingConfig {
  double delta = 0.1;  // mixture component std
  double sigma = 0.0;  // smoothing bandwidth
  int mc_samples = 2;  // M, even: M/2 antithetic pairs

  void validate() const;
  int pairs() const { return mc_samples / 2; }
};

/// Index of a training point left out of the mixture (leave-one-out scores).
using Exclude = std::optional<Eigen::Index>;

/// log[(1/N) sum_i N(z | x_i, delta^2 I)], log-sum-exp stabilized.
double gmm_log_density(const TrainingSet& ts, double delta, const VectorRef& z,
                       Exclude exclude = std::nullopt);

/// Softmax-weighted mean c(z) of the training points.
Vector gmm_posterior_mean(const TrainingSet& ts, double delta, const VectorRef& z,
                          Exclude exclude = std::nullopt);

/// grad log p^delta(z) = (c(z) - z) / delta^2.
Vector gmm_score(const TrainingSet& ts, double delta, const VectorRef& z,
                 Exclude exclude = std::nullopt);

/// Draws the M/2 antithetic directions used by one smoothed evaluation.
Matrix draw_smoothing_noise(const SmoothingConfig& cfg, Eigen::Index dim, Stream& rng);

/// Negative smoothed score g(z) with explicit noise rows eps_r; each row is
/// used as the pair z +/- sigma eps_r.
Vector smoothed_score_with_noise(const TrainingSet& ts, double delta, double sigma,
                                 const VectorRef& z, const MatrixRef& noise,
                                 Exclude exclude = std::nullopt);

/// Smoothed potential V(z) with explicit noise rows, same convention.
double smoothed_potential_with_noise(const TrainingSet& ts, double delta, double sigma,
                                     const VectorRef& z, const MatrixRef& noise,
                                     Exclude exclude = std::nullopt);

/// Antithetic Monte Carlo estimate of g(z) = grad V(z). With sigma = 0 this is
/// exactly -gmm_score(z) and no randomness is consumed.
Vector smoothed_score(const TrainingSet& ts, const SmoothingConfig& cfg, const VectorRef& z,
                      Stream& rng, Exclude exclude = std::nullopt);

/// Antithetic Monte Carlo estimate of V(z) = -E log p^delta(z + sigma eps),
/// drawing noise exactly like smoothed_score.
double smoothed_potential(const TrainingSet& ts, const SmoothingConfig& cfg, const VectorRef& z,
                          Stream& rng, Exclude exclude = std::nullopt);

/// Identifies the per-row substreams of a batch evaluation: row i uses
/// Stream(seed, domain, counter, id(i)).
struct SubstreamKey {
  std::uint64_t seed = 0;
  Domain domain = Domain::Score;
  std::uint64_t counter = 0;

  Stream at(std::uint64_t index) const { return Stream(seed, domain, counter, index); }
};

/// Row i holds g(Z_i). `stream_ids`, when given, overrides the substream index
/// of each row. Bit-identical for any thread count.
Matrix score_batch(const TrainingSet& ts, const SmoothingConfig& cfg, const MatrixRef& z,
                   const SubstreamKey& key, unsigned threads = 1,
                   std::span<const std::uint64_t> stream_ids = {});

}  // namespace mmsold
