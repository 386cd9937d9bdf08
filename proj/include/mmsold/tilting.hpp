#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmsold/gmm.hpp"

namespace mmsold {

enum class Provenance { Empirical, LeaveOneOut, SelfConsistent };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& name);

/// Linear and quadratic exponential tilt of exp(-V):
/// exp(-V(z) - lambda^T z - 0.5 (z - mu)^T Lambda (z - mu)).
struct TiltingParams {
  Vector lambda;
  Matrix quad;  // Lambda, symmetric
  double zeta = 0.0;
  Provenance provenance = Provenance::Empirical;
};

/// 1e-6 * tr(Sigma) / d.
double default_zeta(const TrainingSet& ts);

/// lambda = -mean(g_i), C = (1/N) sum (x_i - mu) g_i^T, and Lambda solving
/// (Sigma + zeta I) Lambda + Lambda (Sigma + zeta I) = 2 (I - sym(C)).
/// `scores` holds g evaluated at the training points, row by row.
TiltingParams tilting_from_scores(const TrainingSet& ts, const MatrixRef& scores, double zeta,
                                  Provenance provenance = Provenance::Empirical);

/// Empirical estimate with g(x_i) from the antithetic estimator. In
/// leave-one-out mode g(x_i) is computed against the mixture without x_i.
TiltingParams estimate_tilting(const TrainingSet& ts, const SmoothingConfig& cfg,
                               std::optional<double> zeta, Provenance mode, std::uint64_t seed,
                               unsigned threads = 1);

/// Scores at the training points, as used by estimate_tilting.
Matrix training_scores(const TrainingSet& ts, const SmoothingConfig& cfg, Provenance mode,
                       std::uint64_t seed, unsigned threads = 1);

/// One class of the minimum expected cost classifier. The potential noise is
/// frozen at construction so energies are deterministic.
struct EnergyModel {
  TrainingSet ts;
  SmoothingConfig cfg;
  TiltingParams params;
  Matrix frozen_noise;  // M/2 x d antithetic directions
  double bias = 0.0;
  std::uint64_t noise_seed = 0;
};

EnergyModel make_energy_model(TrainingSet ts, const SmoothingConfig& cfg, TiltingParams params,
                              std::uint64_t noise_seed);

/// E(z) = V(z) + lambda^T z + 0.5 (z - mu)^T Lambda (z - mu), without the bias.
double mm_energy(const EnergyModel& model, const VectorRef& z);

/// argmin_c E_c(z) + b_c, ties to the lowest class index.
int ecm_classify(const std::vector<EnergyModel>& models, const VectorRef& z);

/// n x C matrix of energies E_c(z_i) (biases excluded).
Matrix energy_table(const std::vector<EnergyModel>& models, const MatrixRef& z, unsigned threads = 1);

/// Mean cross-entropy of logits -E - b against labels.
double cross_entropy(const MatrixRef& energies, const std::vector<int>& labels,
                     const std::vector<double>& biases);

/// Biases minimizing the cross-entropy of logits -E_c - b_c by full-batch
/// gradient descent (energies frozen). Stops at gradient inf-norm < 1e-8 or
/// 10^4 iterations. Biases are anchored at b_0 = 0.
std::vector<double> calibrate_biases(const MatrixRef& energies, const std::vector<int>& labels);

std::vector<double> calibrate_biases(std::vector<EnergyModel>& models, const MatrixRef& validation,
                                     const std::vector<int>& labels, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Two-dimensional quadrature

struct GridSpec {
  double x_min = -1.0, x_max = 1.0;
  double y_min = -1.0, y_max = 1.0;
  int nx = 101, ny = 101;

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  Eigen::Index nodes() const { return static_cast<Eigen::Index>(nx) * ny; }
  /// Node (i, j) has x index i and y index j; flat index i * ny + j.
  Vector node(int i, int j) const;
};

/// Grid covering the data bounding box plus 6 delta + 6 sigma (+ margin) on
/// every side, with roughly the requested spacing.
GridSpec grid_for_data(const TrainingSet& ts, const SmoothingConfig& cfg, double spacing,
                       double extra_margin = 0.0);

enum class SmoothingQuadrature { MonteCarlo, GaussHermite };

struct PotentialOptions {
  SmoothingQuadrature method = SmoothingQuadrature::GaussHermite;
  int hermite_order = 24;     // nodes per axis for Gauss-Hermite
  std::uint64_t noise_seed = 0;  // Monte Carlo: frozen antithetic noise, cfg.mc_samples draws
  unsigned threads = 1;
};

/// V and g = grad V tabulated on the grid nodes (flat order).
struct GridPotential {
  GridSpec grid;
  Matrix nodes;      // nodes x 2
  Vector potential;  // V
  Matrix score;      // g, nodes x 2
};

GridPotential compute_grid_potential(const TrainingSet& ts, const SmoothingConfig& cfg,
                                     const GridSpec& grid, const PotentialOptions& options = {});

struct GridDensity {
  GridSpec grid;
  Matrix nodes;
  Vector density;  // trapezoid-normalized
  Vector weights;  // trapezoid quadrature weights
};

/// Tilted density exp(-V - lambda^T z - 0.5 (z - mu)^T Lambda (z - mu)),
/// normalized by the trapezoid rule.
GridDensity grid_density_2d(const GridPotential& potential, const VectorRef& mu,
                            const TiltingParams& params);

GridDensity grid_density_2d(const TrainingSet& ts, const SmoothingConfig& cfg,
                            const TiltingParams& params, const GridSpec& grid,
                            const PotentialOptions& options = {});

struct QuadratureMoments {
  Vector mean;
  Matrix cov;
};

QuadratureMoments grid_moments(const GridDensity& density);

/// E[g] and E[(Z - mu) g^T] under the grid density.
struct ScoreMoments {
  Vector mean_score;
  Matrix cross;
};

ScoreMoments grid_score_moments(const GridDensity& density, const GridPotential& potential,
                                const VectorRef& mu);

struct SelfConsistentOptions {
  double damping = 1.0;  // Newton step scale
  double tolerance = 1e-6;
  int max_iters = 100;
  double zeta = 0.0;
};

struct SelfConsistentResult {
  TiltingParams params;
  int iterations = 0;
  double mean_error = 0.0;  // ||E z - mu*||_inf
  double cov_error = 0.0;   // ||Cov - Sigma*||_F / ||Sigma*||_F
  /// Residuals of the tilting identities at the solution: |lambda + E g| and
  /// the Lyapunov residual of Sigma Lambda + Lambda Sigma - 2 (I - sym C).
  double lambda_identity = 0.0;
  double lyapunov_identity = 0.0;
};

/// Tilting parameters whose tilted grid density has mean mu* and covariance
/// Sigma*. Solved as the convex dual of the moment constraints with damped
/// Newton steps; throws NoConvergence after max_iters.
SelfConsistentResult solve_tilting_selfconsistent_2d(const TrainingSet& ts,
                                                     const GridPotential& potential,
                                                     const SelfConsistentOptions& options = {});

SelfConsistentResult solve_tilting_selfconsistent_2d(const TrainingSet& ts,
                                                     const SmoothingConfig& cfg,
                                                     const GridSpec& grid,
                                                     const SelfConsistentOptions& options = {},
                                                     const PotentialOptions& potential_options = {});

/// n draws from the grid density: inverse CDF over cell masses with uniform
/// jitter inside the cell.
Matrix sample_grid_density(const GridDensity& density, Eigen::Index n, Stream& rng);

}  // namespace mmsold
