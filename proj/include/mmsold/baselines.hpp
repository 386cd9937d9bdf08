#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mmsold/gmm.hpp"
#include "mmsold/tilting.hpp"

namespace mmsold {

/// Mixture of N(a(t) x_i, b(t)^2 I). Straight flow: a = t, b = 1 - t.
/// Ornstein-Uhlenbeck: a = exp(-alpha t), b^2 = (1 - exp(-2 alpha t)) / alpha.
class TimeIndexedGmm {
 public:
  enum class Preset { Straight, OrnsteinUhlenbeck };

  static TimeIndexedGmm straight() { return TimeIndexedGmm(Preset::Straight, 1.0); }
  static TimeIndexedGmm ornstein_uhlenbeck(double alpha);

  double mean_scale(double t) const;
  double std_dev(double t) const;
  Preset preset() const { return preset_; }
  double alpha() const { return alpha_; }

 private:
  TimeIndexedGmm(Preset preset, double alpha) : preset_(preset), alpha_(alpha) {}
  Preset preset_;
  double alpha_;
};

/// Softmax mean c_t(z) = sum_i w_i^t(z) a(t) x_i.
Vector time_indexed_mean(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                         const VectorRef& z);

/// (c_t(z) - z) / b(t)^2.
Vector time_indexed_score(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                          const VectorRef& z);

/// log sum_j exp(-||z - a x_j||^2 / (2 b^2)), the potential whose gradient is
/// the score above up to the normalizing constant.
double time_indexed_log_sum(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                            const VectorRef& z);

struct CfdmConfig {
  int steps = 100;
  double t_start = 0.01;
  double t_end = 0.99;
  double sigma = 0.0;
  int mc_samples = 2;
  TimeIndexedGmm schedule = TimeIndexedGmm::straight();
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

/// Called after every Euler step with the step index, time, particles and
/// the Monte Carlo averaged drift targets c_t (one row per particle).
using CfdmObserver = std::function<void(int, double, const Matrix&, const Matrix&)>;

/// Euler integration of v = (z + (1 - t) s(t, z)) / t from t_start to t_end
/// with the antithetic smoothed score, starting from N(0, I).
Matrix sigma_cfdm_run(const TrainingSet& ts, const CfdmConfig& cfg,
                      const CfdmObserver& observer = {});

struct BaoabConfig {
  double step_size = 1e-3;
  double friction = 1.0;
  int iterations = 1000;
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

/// Independent kinetic Langevin chains (unit mass and temperature) with BAOAB
/// splitting for the tilted potential V + lambda^T z + 0.5 (z-mu)^T Lambda (z-mu).
/// Positions start from the training mixture, momenta from N(0, I).
Matrix kinetic_langevin_baoab(const TrainingSet& ts, const SmoothingConfig& cfg,
                              const TiltingParams& params, const BaoabConfig& bcfg);

/// Same integrator for an arbitrary potential gradient grad U(z), starting
/// from the given positions. Exposed for analytic-target checks.
using PotentialGradient = std::function<Vector(const VectorRef& z, int iteration, Eigen::Index particle)>;
Matrix baoab_integrate(const MatrixRef& initial, const PotentialGradient& gradient, const BaoabConfig& bcfg);

}  // namespace mmsold
