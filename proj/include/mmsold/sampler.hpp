#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmsold/gmm.hpp"
#include "mmsold/manifold.hpp"

namespace mmsold {

enum class Scheme { LeimkuhlerMatthews, EulerMaruyama };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct NearestNeighborMode {
  Eigen::Index k = 0;
  Eigen::Index l = 0;
};

struct SamplerConfig {
  double step_size = 5e-4;
  int iterations = 100;
  Scheme scheme = Scheme::LeimkuhlerMatthews;
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
  std::optional<NearestNeighborMode> nearest_neighbor;  // full score when empty
  unsigned threads = 1;

  void validate(Eigen::Index dim) const;
};

struct ParticleState {
  ManifoldPoint y;
  Matrix xi_prev;  // ambient noise carried between LM steps
  int iteration = 0;
};

/// Per-iteration constraint and drift diagnostics.
struct IterationDiagnostics {
  int iteration = 0;
  double mean_residual = 0.0;  // ||mean(Z) - mu*||_inf
  double gram_residual = 0.0;  // ||Y^T Y - P I||_F
  double mean_score_norm = 0.0;
  double seconds = 0.0;        // wall clock since the run started
};

struct RunResult {
  Matrix samples;  // P x d, data coordinates
  std::vector<IterationDiagnostics> diagnostics;  // entry 0 is the initialization
  double seconds = 0.0;
};

/// Rows x_I + delta N(0, I) with I uniform, whitened and retracted onto the
/// constraint set. A failed retraction is retried once with fresh draws.
ParticleState init_particles(const TrainingSet& ts, const SmoothingConfig& cfg,
                             const SamplerConfig& scfg);

/// Drift g(Z) for every particle at the given iteration, full or
/// nearest-neighbor estimator.
Matrix evaluate_scores(const TrainingSet& ts, const SmoothingConfig& cfg,
                       const SamplerConfig& scfg, const MatrixRef& z, int iteration);

/// One constrained update from explicit ingredients: projected drift and noise,
/// LM half-sum (or EM) update, retraction.
Matrix constrained_update(const ManifoldPoint& y, const MatrixRef& g_y, const MatrixRef& xi_prev,
                          const MatrixRef& xi, double step_size, Scheme scheme);

/// One iteration. Throws NonFiniteState if the update blows up.
ParticleState step(const ParticleState& state, const TrainingSet& ts, const SmoothingConfig& cfg,
                   const SamplerConfig& scfg);

using IterationObserver = std::function<void(const ParticleState&, const IterationDiagnostics&)>;

/// T iterations from a fresh initialization; returns unwhitened particles.
RunResult run(const TrainingSet& ts, const SmoothingConfig& cfg, const SamplerConfig& scfg,
              const IterationObserver& observer = {});

}  // namespace mmsold
