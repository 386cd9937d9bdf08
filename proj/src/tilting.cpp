#include "mmsold/tilting.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mmsold/error.hpp"
#include "mmsold/parallel.hpp"

namespace mmsold {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Empirical: return "empirical";
    case Provenance::LeaveOneOut: return "leave_one_out";
    case Provenance::SelfConsistent: return "self_consistent";
  }
  return "empirical";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "empirical") return Provenance::Empirical;
  if (name == "leave_one_out") return Provenance::LeaveOneOut;
  if (name == "self_consistent") return Provenance::SelfConsistent;
  throw Error(ErrorKind::InvalidArgument, "unknown tilting provenance '" + name + "'");
}

double default_zeta(const TrainingSet& ts) {
  return 1e-6 * ts.cov().trace() / static_cast<double>(ts.dim());
}

TiltingParams tilting_from_scores(const TrainingSet& ts, const MatrixRef& scores, double zeta,
                                  Provenance provenance) {
  require(scores.rows() == ts.size() && scores.cols() == ts.dim(), ErrorKind::DimensionMismatch,
          "one score row per training point required");
  require(zeta >= 0.0, ErrorKind::InvalidArgument, "zeta must be >= 0");
  const Eigen::Index d = ts.dim();
  const double n = static_cast<double>(ts.size());
  TiltingParams params;
  params.zeta = zeta;
  params.provenance = provenance;
  params.lambda = -scores.colwise().sum().transpose() / n;
  const Matrix centered = ts.points().rowwise() - ts.mean().transpose();
  const Matrix c = centered.transpose() * scores / n;
  Matrix s = ts.cov();
  s.diagonal().array() += zeta;
  const Matrix rhs = 2.0 * (Matrix::Identity(d, d) - sym(c));
  params.quad = lyapunov_solve(s, rhs);
  return params;
}

Matrix training_scores(const TrainingSet& ts, const SmoothingConfig& cfg, Provenance mode,
                       std::uint64_t seed, unsigned threads) {
  cfg.validate();
  require(mode != Provenance::SelfConsistent, ErrorKind::InvalidArgument,
          "training scores are empirical or leave-one-out");
  if (mode == Provenance::LeaveOneOut) {
    require(ts.size() >= 2, ErrorKind::InvalidArgument,
            "leave-one-out needs at least two training points");
  }
  Matrix scores(ts.size(), ts.dim());
  parallel_for(static_cast<std::size_t>(ts.size()), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    Stream rng(seed, Domain::Tilting, 0, i);
    const Exclude exclude = mode == Provenance::LeaveOneOut ? Exclude(row) : std::nullopt;
    scores.row(row) =
        smoothed_score(ts, cfg, ts.points().row(row).transpose(), rng, exclude).transpose();
  });
  return scores;
}

TiltingParams estimate_tilting(const TrainingSet& ts, const SmoothingConfig& cfg,
                               std::optional<double> zeta, Provenance mode, std::uint64_t seed,
                               unsigned threads) {
  const Matrix scores = training_scores(ts, cfg, mode, seed, threads);
  return tilting_from_scores(ts, scores, zeta.value_or(default_zeta(ts)), mode);
}

// ---------------------------------------------------------------------------

EnergyModel make_energy_model(TrainingSet ts, const SmoothingConfig& cfg, TiltingParams params,
                              std::uint64_t noise_seed) {
  cfg.validate();
  require(params.lambda.size() == ts.dim() && params.quad.rows() == ts.dim() &&
              params.quad.cols() == ts.dim(),
          ErrorKind::DimensionMismatch, "tilting parameters do not match the data dimension");
  Stream rng(noise_seed, Domain::Frozen);
  Matrix noise = draw_smoothing_noise(cfg, ts.dim(), rng);
  return EnergyModel{std::move(ts), cfg, std::move(params), std::move(noise), 0.0, noise_seed};
}

double mm_energy(const EnergyModel& model, const VectorRef& z) {
  const Vector u = z - model.ts.mean();
  const double v = smoothed_potential_with_noise(model.ts, model.cfg.delta, model.cfg.sigma, z,
                                                 model.frozen_noise);
  return v + model.params.lambda.dot(z) + 0.5 * u.dot(model.params.quad * u);
}

int ecm_classify(const std::vector<EnergyModel>& models, const VectorRef& z) {
  require(!models.empty(), ErrorKind::InvalidArgument, "no class models");
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < models.size(); ++c) {
    require(models[c].ts.dim() == z.size(), ErrorKind::DimensionMismatch,
            "class models must share the query dimension");
    const double value = mm_energy(models[c], z) + models[c].bias;
    if (value < best_value) {
      best_value = value;
      best = static_cast<int>(c);
    }
  }
  return best;
}

Matrix energy_table(const std::vector<EnergyModel>& models, const MatrixRef& z, unsigned threads) {
  Matrix table(z.rows(), static_cast<Eigen::Index>(models.size()));
  parallel_for(static_cast<std::size_t>(z.rows()), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < models.size(); ++c)
      table(row, static_cast<Eigen::Index>(c)) = mm_energy(models[c], z.row(row).transpose());
  });
  return table;
}

namespace {

// Softmax probabilities of logits -E - b for one row.
void class_probabilities(const MatrixRef& energies, Eigen::Index row, const std::vector<double>& b,
                         Vector& prob) {
  const Eigen::Index classes = energies.cols();
  prob.resize(classes);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < classes; ++c) {
    prob(c) = -energies(row, c) - b[c];
    best = std::max(best, prob(c));
  }
  prob = (prob.array() - best).exp();
  prob /= prob.sum();
}

}  // namespace

double cross_entropy(const MatrixRef& energies, const std::vector<int>& labels,
                     const std::vector<double>& biases) {
  require(static_cast<Eigen::Index>(labels.size()) == energies.rows(), ErrorKind::DimensionMismatch,
          "one label per row required");
  double total = 0.0;
  for (Eigen::Index i = 0; i < energies.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < energies.cols(); ++c) best = std::max(best, -energies(i, c) - biases[c]);
    double sum = 0.0;
    for (Eigen::Index c = 0; c < energies.cols(); ++c) sum += std::exp(-energies(i, c) - biases[c] - best);
    const int y = labels[i];
    total -= (-energies(i, y) - biases[y] - best) - std::log(sum);
  }
  return total / static_cast<double>(energies.rows());
}

std::vector<double> calibrate_biases(const MatrixRef& energies, const std::vector<int>& labels) {
  const Eigen::Index classes = energies.cols();
  require(static_cast<Eigen::Index>(labels.size()) == energies.rows(), ErrorKind::DimensionMismatch,
          "one label per validation row required");
  std::vector<double> b(static_cast<std::size_t>(classes), 0.0);
  if (classes <= 1) return b;
  std::vector<int> seen(static_cast<std::size_t>(classes), 0);
  for (int y : labels) {
    require(y >= 0 && y < classes, ErrorKind::InvalidArgument, "label out of range");
    seen[y] = 1;
  }
  for (int s : seen)
    require(s == 1, ErrorKind::InvalidArgument, "every class needs a validation sample");

  const double n = static_cast<double>(energies.rows());
  Vector prob, grad(classes);
  // The mean cross-entropy has Hessian bounded by 1/2 in b, so a unit step
  // is a descent step.
  constexpr double kStep = 1.0;
  for (int iter = 0; iter < 10000; ++iter) {
    grad.setZero();
    for (Eigen::Index i = 0; i < energies.rows(); ++i) {
      class_probabilities(energies, i, b, prob);
      grad -= prob;
      grad(labels[i]) += 1.0;
    }
    grad /= n;
    if (grad.cwiseAbs().maxCoeff() < 1e-8) break;
    for (Eigen::Index c = 0; c < classes; ++c) b[c] -= kStep * grad(c);
  }
  const double anchor = b[0];
  for (double& v : b) v -= anchor;
  return b;
}

std::vector<double> calibrate_biases(std::vector<EnergyModel>& models, const MatrixRef& validation,
                                     const std::vector<int>& labels, unsigned threads) {
  const Matrix table = energy_table(models, validation, threads);
  std::vector<double> b = calibrate_biases(table, labels);
  for (std::size_t c = 0; c < models.size(); ++c) models[c].bias = b[c];
  return b;
}

// ---------------------------------------------------------------------------

Vector GridSpec::node(int i, int j) const {
  Vector z(2);
  z << x_min + i * dx(), y_min + j * dy();
  return z;
}

GridSpec grid_for_data(const TrainingSet& ts, const SmoothingConfig& cfg, double spacing,
                       double extra_margin) {
  require(ts.dim() == 2, ErrorKind::DimensionMismatch, "grid quadrature is two-dimensional");
  require(spacing > 0.0, ErrorKind::InvalidArgument, "grid spacing must be > 0");
  const double margin = 6.0 * cfg.delta + 6.0 * cfg.sigma + extra_margin;
  const Vector lo = ts.points().colwise().minCoeff().transpose();
  const Vector hi = ts.points().colwise().maxCoeff().transpose();
  GridSpec grid;
  grid.x_min = lo(0) - margin;
  grid.x_max = hi(0) + margin;
  grid.y_min = lo(1) - margin;
  grid.y_max = hi(1) + margin;
  grid.nx = static_cast<int>(std::ceil((grid.x_max - grid.x_min) / spacing)) + 1;
  grid.ny = static_cast<int>(std::ceil((grid.y_max - grid.y_min) / spacing)) + 1;
  return grid;
}

namespace {

// Probabilists' Gauss-Hermite rule for E f(X), X ~ N(0, 1), by Golub-Welsch.
std::pair<Vector, Vector> gauss_hermite(int order) {
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  const SymEig eig = sym_eig(jacobi);
  Vector weights = eig.eigenvectors.row(0).transpose().array().square();
  weights /= weights.sum();
  return {eig.eigenvalues, weights};
}

}  // namespace

GridPotential compute_grid_potential(const TrainingSet& ts, const SmoothingConfig& cfg,
                                     const GridSpec& grid, const PotentialOptions& options) {
  cfg.validate();
  require(ts.dim() == 2, ErrorKind::DimensionMismatch, "grid quadrature is two-dimensional");
  require(grid.nx >= 2 && grid.ny >= 2, ErrorKind::InvalidArgument, "grid needs >= 2 nodes per axis");

  // Smoothing directions with weights; the expectation is sum_r w_r f(z + sigma e_r).
  Matrix directions;
  Vector dir_weights;
  if (cfg.sigma == 0.0) {
    directions = Matrix::Zero(1, 2);
    dir_weights = Vector::Ones(1);
  } else if (options.method == SmoothingQuadrature::GaussHermite) {
    const auto [x, w] = gauss_hermite(options.hermite_order);
    const int q = options.hermite_order;
    directions.resize(q * q, 2);
    dir_weights.resize(q * q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        directions.row(a * q + b) << x(a), x(b);
        dir_weights(a * q + b) = w(a) * w(b);
      }
  } else {
    Stream rng(options.noise_seed, Domain::Frozen);
    const Matrix half = draw_smoothing_noise(cfg, 2, rng);
    directions.resize(2 * half.rows(), 2);
    directions << half, -half;
    dir_weights = Vector::Constant(directions.rows(), 1.0 / static_cast<double>(directions.rows()));
  }

  GridPotential out;
  out.grid = grid;
  out.nodes.resize(grid.nodes(), 2);
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j) out.nodes.row(static_cast<Eigen::Index>(i) * grid.ny + j) = grid.node(i, j).transpose();
  out.potential.resize(grid.nodes());
  out.score.resize(grid.nodes(), 2);

  parallel_for(static_cast<std::size_t>(grid.nodes()), options.threads, [&](std::size_t flat) {
    const auto k = static_cast<Eigen::Index>(flat);
    const Vector z = out.nodes.row(k).transpose();
    double v = 0.0;
    Vector c_mean = Vector::Zero(2);
    Vector y(2);
    for (Eigen::Index r = 0; r < directions.rows(); ++r) {
      y = z + cfg.sigma * directions.row(r).transpose();
      v -= dir_weights(r) * gmm_log_density(ts, cfg.delta, y);
      c_mean += dir_weights(r) * gmm_posterior_mean(ts, cfg.delta, y);
    }
    out.potential(k) = v;
    out.score.row(k) = ((z - c_mean) / (cfg.delta * cfg.delta)).transpose();
  });
  return out;
}

namespace {

Vector trapezoid_weights(const GridSpec& grid) {
  Vector w(grid.nodes());
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j) {
      const double wx = (i == 0 || i == grid.nx - 1) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == grid.ny - 1) ? 0.5 : 1.0;
      w(static_cast<Eigen::Index>(i) * grid.ny + j) = wx * wy * grid.dx() * grid.dy();
    }
  return w;
}

Vector tilted_energy(const GridPotential& potential, const VectorRef& mu, const TiltingParams& params) {
  const Matrix u = potential.nodes.rowwise() - mu.transpose();
  Vector e = potential.potential + potential.nodes * params.lambda;
  e += 0.5 * ((u * params.quad).cwiseProduct(u)).rowwise().sum();
  return e;
}

}  // namespace

GridDensity grid_density_2d(const GridPotential& potential, const VectorRef& mu,
                            const TiltingParams& params) {
  GridDensity out;
  out.grid = potential.grid;
  out.nodes = potential.nodes;
  out.weights = trapezoid_weights(potential.grid);
  const Vector e = tilted_energy(potential, mu, params);
  const double lowest = e.minCoeff();
  out.density = (-(e.array() - lowest)).exp();
  const double mass = out.weights.dot(out.density);
  require(std::isfinite(mass) && mass > 0.0, ErrorKind::NonFiniteState, "grid density is not normalizable");
  out.density /= mass;
  return out;
}

GridDensity grid_density_2d(const TrainingSet& ts, const SmoothingConfig& cfg,
                            const TiltingParams& params, const GridSpec& grid,
                            const PotentialOptions& options) {
  return grid_density_2d(compute_grid_potential(ts, cfg, grid, options), ts.mean(), params);
}

QuadratureMoments grid_moments(const GridDensity& density) {
  const Vector p = density.weights.cwiseProduct(density.density);
  QuadratureMoments m;
  m.mean = density.nodes.transpose() * p;
  const Matrix u = density.nodes.rowwise() - m.mean.transpose();
  m.cov = sym(u.transpose() * p.asDiagonal() * u);
  return m;
}

ScoreMoments grid_score_moments(const GridDensity& density, const GridPotential& potential,
                                const VectorRef& mu) {
  const Vector p = density.weights.cwiseProduct(density.density);
  ScoreMoments s;
  s.mean_score = potential.score.transpose() * p;
  const Matrix u = density.nodes.rowwise() - mu.transpose();
  s.cross = u.transpose() * p.asDiagonal() * potential.score;
  return s;
}

namespace {

// Sufficient statistics (z1, z2, u1^2/2, u1 u2, u2^2/2) with u = z - mu.
Matrix tilt_features(const Matrix& nodes, const Vector& mu) {
  Matrix f(nodes.rows(), 5);
  for (Eigen::Index k = 0; k < nodes.rows(); ++k) {
    const double u1 = nodes(k, 0) - mu(0);
    const double u2 = nodes(k, 1) - mu(1);
    f.row(k) << nodes(k, 0), nodes(k, 1), 0.5 * u1 * u1, u1 * u2, 0.5 * u2 * u2;
  }
  return f;
}

TiltingParams params_from_theta(const Vector& theta) {
  TiltingParams p;
  p.lambda = theta.head(2);
  p.quad.resize(2, 2);
  p.quad << theta(2), theta(3), theta(3), theta(4);
  p.provenance = Provenance::SelfConsistent;
  return p;
}

struct DualState {
  double value = 0.0;   // log partition + theta . target
  Vector gradient;      // target - E[features]
  Matrix hessian;       // Cov[features]
};

DualState evaluate_dual(const GridPotential& potential, const Matrix& features, const Vector& weights,
                        const Vector& target, const Vector& theta) {
  const Vector e = potential.potential + features * theta;
  const double lowest = e.minCoeff();
  const Vector unnormalized = weights.cwiseProduct((-(e.array() - lowest)).exp().matrix());
  const double mass = unnormalized.sum();
  DualState s;
  s.value = std::log(mass) - lowest + theta.dot(target);
  const Vector p = unnormalized / mass;
  const Vector mean = features.transpose() * p;
  s.gradient = target - mean;
  const Matrix centered = features.rowwise() - mean.transpose();
  s.hessian = centered.transpose() * p.asDiagonal() * centered;
  return s;
}

}  // namespace

SelfConsistentResult solve_tilting_selfconsistent_2d(const TrainingSet& ts,
                                                     const GridPotential& potential,
                                                     const SelfConsistentOptions& options) {
  require(ts.dim() == 2, ErrorKind::DimensionMismatch, "self-consistent solve is two-dimensional");
  require(options.damping > 0.0 && options.damping <= 1.0, ErrorKind::InvalidArgument,
          "damping must lie in (0, 1]");
  const Vector& mu = ts.mean();
  const Matrix& sigma = ts.cov();
  const Matrix features = tilt_features(potential.nodes, mu);
  const Vector weights = trapezoid_weights(potential.grid);
  Vector target(5);
  target << mu(0), mu(1), 0.5 * sigma(0, 0), sigma(0, 1), 0.5 * sigma(1, 1);

  Vector theta = Vector::Zero(5);
  DualState state = evaluate_dual(potential, features, weights, target, theta);
  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iters; ++iter) {
    const Vector direction = state.hessian.ldlt().solve(state.gradient);
    // The dual objective is convex; backtrack until it decreases.
    double scale = options.damping;
    Vector next = theta;
    DualState next_state;
    for (int halvings = 0; halvings < 60; ++halvings) {
      next = theta - scale * direction;
      next_state = evaluate_dual(potential, features, weights, target, next);
      if (std::isfinite(next_state.value) && next_state.value <= state.value + 1e-14 * std::abs(state.value))
        break;
      scale *= 0.5;
    }
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    state = next_state;
    if (change < options.tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "moment-matching solve did not converge in " << options.max_iters
        << " iterations (moment residual " << state.gradient.cwiseAbs().maxCoeff() << ")";
    throw Error(ErrorKind::NoConvergence, msg.str());
  }

  SelfConsistentResult result;
  result.params = params_from_theta(theta);
  result.params.zeta = options.zeta;
  result.iterations = iter;
  const GridDensity density = grid_density_2d(potential, mu, result.params);
  const QuadratureMoments moments = grid_moments(density);
  result.mean_error = (moments.mean - mu).cwiseAbs().maxCoeff();
  result.cov_error = (moments.cov - sigma).norm() / sigma.norm();

  const ScoreMoments sm = grid_score_moments(density, potential, mu);
  result.lambda_identity = (result.params.lambda + sm.mean_score).cwiseAbs().maxCoeff();
  const Matrix lhs = sigma * result.params.quad + result.params.quad * sigma;
  const Matrix rhs = 2.0 * (Matrix::Identity(2, 2) - sym(sm.cross));
  result.lyapunov_identity = (lhs - rhs).norm() / std::max(1.0, rhs.norm());
  return result;
}

SelfConsistentResult solve_tilting_selfconsistent_2d(const TrainingSet& ts,
                                                     const SmoothingConfig& cfg,
                                                     const GridSpec& grid,
                                                     const SelfConsistentOptions& options,
                                                     const PotentialOptions& potential_options) {
  return solve_tilting_selfconsistent_2d(ts, compute_grid_potential(ts, cfg, grid, potential_options),
                                         options);
}

Matrix sample_grid_density(const GridDensity& density, Eigen::Index n, Stream& rng) {
  const Vector mass = density.weights.cwiseProduct(density.density);
  std::vector<double> cumulative(static_cast<std::size_t>(mass.size()));
  double running = 0.0;
  for (Eigen::Index k = 0; k < mass.size(); ++k) {
    running += mass(k);
    cumulative[k] = running;
  }
  const GridSpec& g = density.grid;
  Matrix out(n, 2);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double u = rng.uniform() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const auto k = static_cast<Eigen::Index>(it - cumulative.begin());
    out(s, 0) = density.nodes(k, 0) + (rng.uniform() - 0.5) * g.dx();
    out(s, 1) = density.nodes(k, 1) + (rng.uniform() - 0.5) * g.dy();
  }
  return out;
}

}  // namespace mmsold
