#include "mmsold/sampler.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "mmsold/error.hpp"
#include "mmsold/nn_score.hpp"
#include "mmsold/parallel.hpp"

namespace mmsold {

std::string to_string(Scheme scheme) {
  return scheme == Scheme::LeimkuhlerMatthews ? "lm" : "em";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "lm" || name == "LM") return Scheme::LeimkuhlerMatthews;
  if (name == "em" || name == "EM") return Scheme::EulerMaruyama;
  throw Error(ErrorKind::InvalidArgument, "unknown scheme '" + name + "' (expected lm or em)");
}

void SamplerConfig::validate(Eigen::Index dim) const {
  require(step_size >= 0.0 && std::isfinite(step_size), ErrorKind::InvalidArgument,
          "step_size must be finite and >= 0");
  require(iterations >= 0, ErrorKind::InvalidArgument, "iterations must be >= 0");
  if (particles < dim + 1) {
    std::ostringstream msg;
    msg << "particles = " << particles << " but moment matching in d = " << dim
        << " needs P >= d + 1";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  if (nearest_neighbor) {
    require(nearest_neighbor->k >= 1 && nearest_neighbor->l >= 0, ErrorKind::InvalidBudget,
            "nearest-neighbor mode needs K >= 1 and L >= 0");
  }
}

namespace {

WhiteningMap whitening_for(const TrainingSet& ts) {
  return WhiteningMap(ts.mean(), ts.cholesky().chol);
}

Matrix langevin_noise(const SamplerConfig& scfg, Domain domain, std::uint64_t counter,
                      Eigen::Index p, Eigen::Index d) {
  Matrix xi(p, d);
  for (Eigen::Index i = 0; i < p; ++i) {
    Stream rng(scfg.seed, domain, counter, static_cast<std::uint64_t>(i));
    rng.fill_normal(xi.row(i));
  }
  return xi;
}

IterationDiagnostics diagnose(const TrainingSet& ts, const WhiteningMap& map, const ManifoldPoint& y,
                              int iteration, double mean_score_norm, double seconds) {
  const Matrix z = map.unwhiten(y.matrix());
  IterationDiagnostics diag;
  diag.iteration = iteration;
  diag.mean_residual =
      (z.colwise().sum().transpose() / static_cast<double>(z.rows()) - ts.mean()).cwiseAbs().maxCoeff();
  diag.gram_residual = y.residual().gram;
  diag.mean_score_norm = mean_score_norm;
  diag.seconds = seconds;
  return diag;
}

}  // namespace

ParticleState init_particles(const TrainingSet& ts, const SmoothingConfig& cfg,
                             const SamplerConfig& scfg) {
  cfg.validate();
  scfg.validate(ts.dim());
  const WhiteningMap map = whitening_for(ts);
  const Eigen::Index p = scfg.particles;
  const Eigen::Index d = ts.dim();

  for (std::uint64_t attempt = 0;; ++attempt) {
    Matrix z(p, d);
    for (Eigen::Index i = 0; i < p; ++i) {
      Stream rng(scfg.seed, Domain::Init, attempt, static_cast<std::uint64_t>(i));
      const auto pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(ts.size())));
      for (Eigen::Index j = 0; j < d; ++j) z(i, j) = ts.points()(pick, j) + cfg.delta * rng.normal();
    }
    try {
      ManifoldPoint y = retract(map.whiten(z));
      Matrix xi = langevin_noise(scfg, Domain::InitNoise, attempt, p, d);
      return ParticleState{std::move(y), std::move(xi), 0};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RankDeficient || attempt >= 1) throw;
    }
  }
}

Matrix evaluate_scores(const TrainingSet& ts, const SmoothingConfig& cfg,
                       const SamplerConfig& scfg, const MatrixRef& z, int iteration) {
  const SubstreamKey key{scfg.seed, Domain::Score, static_cast<std::uint64_t>(iteration)};
  if (!scfg.nearest_neighbor) return score_batch(ts, cfg, z, key, scfg.threads);

  const NeighborIndex index = build_index(ts);
  const auto [k, l] = *scfg.nearest_neighbor;
  Matrix out(z.rows(), z.cols());
  parallel_for(static_cast<std::size_t>(z.rows()), scfg.threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    Stream rng = key.at(i);
    out.row(row) = nn_smoothed_score(ts, index, cfg, k, l, z.row(row).transpose(), rng).transpose();
  });
  return out;
}

Matrix constrained_update(const ManifoldPoint& y, const MatrixRef& g_y, const MatrixRef& xi_prev,
                          const MatrixRef& xi, double step_size, Scheme scheme) {
  Matrix next = y.matrix() - step_size * project_tangent(y, g_y);
  if (scheme == Scheme::LeimkuhlerMatthews) {
    next += std::sqrt(step_size / 2.0) * (project_tangent(y, xi_prev) + project_tangent(y, xi));
  } else {
    next += std::sqrt(2.0 * step_size) * project_tangent(y, xi);
  }
  return next;
}

namespace {

ParticleState advance(const ParticleState& state, const TrainingSet& ts, const SmoothingConfig& cfg,
                      const SamplerConfig& scfg, const WhiteningMap& map, double* mean_score_norm) {
  const Eigen::Index p = state.y.particles();
  const Eigen::Index d = state.y.dim();
  const Matrix z = map.unwhiten(state.y.matrix());
  const Matrix g_z = evaluate_scores(ts, cfg, scfg, z, state.iteration);
  if (mean_score_norm) *mean_score_norm = g_z.rowwise().norm().mean();
  const Matrix g_y = map.pullback_gradient(g_z);
  Matrix xi = langevin_noise(scfg, Domain::Langevin, static_cast<std::uint64_t>(state.iteration), p, d);

  const Matrix next = constrained_update(state.y, g_y, state.xi_prev, xi, scfg.step_size, scfg.scheme);
  if (!next.allFinite()) {
    std::ostringstream msg;
    msg << "iteration " << state.iteration << ": non-finite particles with h = " << scfg.step_size
        << ", delta = " << cfg.delta << "; the stable step size scales like delta^2 = "
        << cfg.delta * cfg.delta << ", reduce h";
    throw Error(ErrorKind::NonFiniteState, msg.str());
  }
  ManifoldPoint y = [&] {
    try {
      return retract(next);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "iteration " << state.iteration << ": " << e.detail();
      throw Error(e.kind(), msg.str());
    }
  }();
  return ParticleState{std::move(y), std::move(xi), state.iteration + 1};
}

}  // namespace

ParticleState step(const ParticleState& state, const TrainingSet& ts, const SmoothingConfig& cfg,
                   const SamplerConfig& scfg) {
  cfg.validate();
  scfg.validate(ts.dim());
  return advance(state, ts, cfg, scfg, whitening_for(ts), nullptr);
}

RunResult run(const TrainingSet& ts, const SmoothingConfig& cfg, const SamplerConfig& scfg,
              const IterationObserver& observer) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  ParticleState state = init_particles(ts, cfg, scfg);
  const WhiteningMap map = whitening_for(ts);
  RunResult result;
  result.diagnostics.push_back(diagnose(ts, map, state.y, 0, 0.0, elapsed()));
  if (observer) observer(state, result.diagnostics.back());

  for (int k = 0; k < scfg.iterations; ++k) {
    double score_norm = 0.0;
    state = advance(state, ts, cfg, scfg, map, &score_norm);
    result.diagnostics.push_back(diagnose(ts, map, state.y, state.iteration, score_norm, elapsed()));
    if (observer) observer(state, result.diagnostics.back());
  }
  result.samples = map.unwhiten(state.y.matrix());
  result.seconds = elapsed();
  return result;
}

}  // namespace mmsold
