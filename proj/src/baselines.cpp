#include "mmsold/baselines.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "mmsold/error.hpp"
#include "mmsold/parallel.hpp"

namespace mmsold {

TimeIndexedGmm TimeIndexedGmm::ornstein_uhlenbeck(double alpha) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "OU rate alpha must be > 0");
  return TimeIndexedGmm(Preset::OrnsteinUhlenbeck, alpha);
}

double TimeIndexedGmm::mean_scale(double t) const {
  return preset_ == Preset::Straight ? t : std::exp(-alpha_ * t);
}

double TimeIndexedGmm::std_dev(double t) const {
  if (preset_ == Preset::Straight) return 1.0 - t;
  return std::sqrt(-std::expm1(-2.0 * alpha_ * t) / alpha_);
}

namespace {

double time_logits(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t, const VectorRef& z,
                   std::vector<double>& logits) {
  const double a = tgmm.mean_scale(t);
  const double b = tgmm.std_dev(t);
  require(b > 0.0, ErrorKind::InvalidArgument, "time-indexed std b(t) must be > 0");
  require(z.size() == ts.dim(), ErrorKind::DimensionMismatch, "query dimension differs from data");
  const Matrix& x = ts.points();
  logits.resize(static_cast<std::size_t>(x.rows()));
  const double scale = -0.5 / (b * b);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    logits[i] = scale * (a * x.row(i).transpose() - z).squaredNorm();
    best = std::max(best, logits[i]);
  }
  return best;
}

}  // namespace

Vector time_indexed_mean(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                         const VectorRef& z) {
  std::vector<double> logits;
  const double best = time_logits(tgmm, ts, t, z, logits);
  require(std::isfinite(best), ErrorKind::DegenerateDenominator, "non-finite time-indexed logits");
  const double a = tgmm.mean_scale(t);
  Vector c = Vector::Zero(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < ts.size(); ++i) {
    const double w = exp_or_zero(logits[i] - best);
    total += w;
    c += w * ts.points().row(i).transpose();
  }
  return a * c / total;
}

Vector time_indexed_score(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                          const VectorRef& z) {
  const double b = tgmm.std_dev(t);
  return (time_indexed_mean(tgmm, ts, t, z) - z) / (b * b);
}

double time_indexed_log_sum(const TimeIndexedGmm& tgmm, const TrainingSet& ts, double t,
                            const VectorRef& z) {
  std::vector<double> logits;
  const double best = time_logits(tgmm, ts, t, z, logits);
  double sum = 0.0;
  for (double l : logits) sum += exp_or_zero(l - best);
  return best + std::log(sum);
}

void CfdmConfig::validate() const {
  require(steps >= 1, ErrorKind::InvalidArgument, "cfdm steps must be >= 1");
  require(0.0 < t_start && t_start < t_end && t_end < 1.0, ErrorKind::InvalidArgument,
          "cfdm needs 0 < t_start < t_end < 1");
  require(sigma >= 0.0, ErrorKind::InvalidArgument, "sigma must be >= 0");
  require(mc_samples >= 2 && mc_samples % 2 == 0, ErrorKind::InvalidArgument,
          "mc_samples must be even and >= 2");
  require(particles >= 1, ErrorKind::InvalidArgument, "particles must be >= 1");
}

Matrix sigma_cfdm_run(const TrainingSet& ts, const CfdmConfig& cfg, const CfdmObserver& observer) {
  cfg.validate();
  const Eigen::Index p = cfg.particles;
  const Eigen::Index d = ts.dim();
  Matrix z(p, d);
  for (Eigen::Index i = 0; i < p; ++i) {
    Stream rng(cfg.seed, Domain::Baseline, 0, static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.normal();
  }
  const double dt = (cfg.t_end - cfg.t_start) / cfg.steps;
  const int pairs = cfg.mc_samples / 2;
  Matrix targets(p, d);
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = cfg.t_start + k * dt;
    const double b = cfg.schedule.std_dev(t);
    parallel_for(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t idx) {
      const auto i = static_cast<Eigen::Index>(idx);
      const Vector zi = z.row(i).transpose();
      Vector c = Vector::Zero(d);
      if (cfg.sigma == 0.0) {
        c = time_indexed_mean(cfg.schedule, ts, t, zi);
      } else {
        // Fresh antithetic noise at every Euler step.
        Stream rng(cfg.seed, Domain::Baseline, static_cast<std::uint64_t>(k) + 1, idx);
        Vector eps(d);
        for (int r = 0; r < pairs; ++r) {
          rng.fill_normal(eps);
          c += time_indexed_mean(cfg.schedule, ts, t, zi + cfg.sigma * eps);
          c += time_indexed_mean(cfg.schedule, ts, t, zi - cfg.sigma * eps);
        }
        c /= static_cast<double>(2 * pairs);
      }
      targets.row(i) = c.transpose();
    });
    // s = (c - z) / b^2 and v = (z + (1 - t) s) / t.
    const Matrix score = (targets - z) / (b * b);
    const Matrix velocity = (z + (1.0 - t) * score) / t;
    z += dt * velocity;
    if (!z.allFinite()) {
      std::ostringstream msg;
      msg << "sigma-CFDM produced non-finite particles at Euler step " << k;
      throw Error(ErrorKind::NonFiniteState, msg.str());
    }
    if (observer) observer(k, t, z, targets);
  }
  return z;
}

void BaoabConfig::validate() const {
  require(step_size > 0.0, ErrorKind::InvalidArgument, "BAOAB step size must be > 0");
  require(friction > 0.0, ErrorKind::InvalidArgument, "BAOAB friction must be > 0");
  require(iterations >= 0, ErrorKind::InvalidArgument, "BAOAB iterations must be >= 0");
  require(particles >= 1, ErrorKind::InvalidArgument, "BAOAB particles must be >= 1");
}

Matrix baoab_integrate(const MatrixRef& initial, const PotentialGradient& gradient, const BaoabConfig& bcfg) {
  bcfg.validate();
  const Eigen::Index p = initial.rows();
  const Eigen::Index d = initial.cols();
  Matrix q = initial;
  const double h = bcfg.step_size;
  const double decay = std::exp(-bcfg.friction * h);
  const double kick = std::sqrt(-std::expm1(-2.0 * bcfg.friction * h));

  parallel_for(static_cast<std::size_t>(p), bcfg.threads, [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    Stream rng(bcfg.seed, Domain::Baseline, 0, idx);
    Vector pos = q.row(i).transpose();
    Vector mom(d);
    rng.fill_normal(mom);
    Vector force_grad = gradient(pos, 0, i);
    Vector xi(d);
    for (int k = 0; k < bcfg.iterations; ++k) {
      mom -= 0.5 * h * force_grad;                 // B
      pos += 0.5 * h * mom;                        // A
      rng.fill_normal(xi);
      mom = decay * mom + kick * xi;               // O
      pos += 0.5 * h * mom;                        // A
      force_grad = gradient(pos, k + 1, i);
      mom -= 0.5 * h * force_grad;                 // B
    }
    if (!pos.allFinite()) {
      std::ostringstream msg;
      msg << "BAOAB chain " << i << " diverged; reduce the step size";
      throw Error(ErrorKind::NonFiniteState, msg.str());
    }
    q.row(i) = pos.transpose();
  });
  return q;
}

Matrix kinetic_langevin_baoab(const TrainingSet& ts, const SmoothingConfig& cfg,
                              const TiltingParams& params, const BaoabConfig& bcfg) {
  cfg.validate();
  bcfg.validate();
  require(params.lambda.allFinite() && params.quad.allFinite(), ErrorKind::InvalidArgument,
          "tilting parameters must be finite");
  require(params.lambda.size() == ts.dim(), ErrorKind::DimensionMismatch, "lambda dimension mismatch");
  const Eigen::Index d = ts.dim();
  Matrix initial(bcfg.particles, d);
  for (Eigen::Index i = 0; i < bcfg.particles; ++i) {
    Stream rng(bcfg.seed, Domain::Init, 0, static_cast<std::uint64_t>(i));
    const auto pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(ts.size())));
    for (Eigen::Index j = 0; j < d; ++j) initial(i, j) = ts.points()(pick, j) + cfg.delta * rng.normal();
  }
  const Vector& mu = ts.mean();
  const PotentialGradient field = [&](const VectorRef& z, int iteration, Eigen::Index particle) -> Vector {
    Stream rng(bcfg.seed, Domain::Score, static_cast<std::uint64_t>(iteration),
               static_cast<std::uint64_t>(particle));
    return smoothed_score(ts, cfg, z, rng) + params.lambda + params.quad * (z - mu);
  };
  return baoab_integrate(initial, field, bcfg);
}

}  // namespace mmsold
