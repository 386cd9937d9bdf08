#pragma once

#include <vector>

#include "mmsold/gmm.hpp"

namespace mmsold {

/// Exact Euclidean K-nearest-neighbor queries over a training set by brute
/// force. Results are ordered by distance, ties by ascending index.
class NeighborIndex {
 public:
  explicit NeighborIndex(const TrainingSet& ts);

  std::vector<Eigen::Index> query(const VectorRef& z, Eigen::Index k) const;

  const TrainingSet& training() const { return *ts_; }

 private:
  const TrainingSet* ts_;
};

NeighborIndex build_index(const TrainingSet& ts);

/// U(z) = A_K(z) u B_L(z) with importance weights.
struct LocalSubset {
  std::vector<Eigen::Index> nearest;     // A_K, by distance
  std::vector<Eigen::Index> remainder;   // B_L, uniform without replacement
  std::vector<Eigen::Index> indices;     // union, ascending
  std::vector<double> weights;           // aligned with `indices`
  Matrix gram;                           // m x m Gram matrix, only when m < d
};

/// Throws InvalidBudget unless K >= 1, L >= 0 and K + L <= N. When L == N - K
/// or L == 0 no randomness is consumed.
LocalSubset select_local_subset(const NeighborIndex& idx, const VectorRef& z, Eigen::Index k,
                                Eigen::Index l, Stream& rng);

struct LocalSums {
  double t0 = 0.0;
  Vector t1;
};

/// Unnormalized corrected sums T0(y|z) and T1(y|z) over the subset.
LocalSums local_sums(const TrainingSet& ts, const LocalSubset& subset, double delta,
                     const VectorRef& y);

struct NnOptions {
  // Draw ambient noise even when K + L < d (used to compare the two regimes).
  bool force_ambient = false;
};

/// Nearest-neighbor estimate of g(z). With K + L < d the smoothing noise only
/// enters through eta ~ N(0, G) on the local logits; otherwise eps ~ N(0, I_d)
/// is drawn in the ambient space. The subset is drawn from `rng` first, then
/// the noise. Throws DegenerateDenominator when the local softmax is empty.
Vector nn_smoothed_score(const TrainingSet& ts, const NeighborIndex& idx,
                         const SmoothingConfig& cfg, Eigen::Index k, Eigen::Index l,
                         const VectorRef& z, Stream& rng, NnOptions options = {});

/// Same estimator on a fixed subset.
Vector nn_smoothed_score_on_subset(const TrainingSet& ts, const LocalSubset& subset,
                                   const SmoothingConfig& cfg, const VectorRef& z, Stream& rng,
                                   NnOptions options = {});

/// Logit perturbations sigma * eta_a / delta^2 for one draw, projected
/// regime (eta ~ N(0, G)) or ambient regime (eta_a = <eps, x_a>).
Vector sample_logit_perturbation(const TrainingSet& ts, const LocalSubset& subset,
                                 const SmoothingConfig& cfg, bool ambient, Stream& rng);

}  // namespace mmsold
