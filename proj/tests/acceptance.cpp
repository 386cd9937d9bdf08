#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mmsold/baselines.hpp"
#include "mmsold/datasets.hpp"
#include "mmsold/error.hpp"
#include "mmsold/manifold.hpp"
#include "mmsold/metrics.hpp"
#include "mmsold/nn_score.hpp"
#include "mmsold/sampler.hpp"
#include "mmsold/tilting.hpp"
#include "oracles.hpp"

using namespace mmsold;

namespace {

// Criterion 1 and 3
constexpr double kMeanTol = 1e-8;
constexpr double kGramTolPerParticle = 1e-6;
// Criterion 2
constexpr double kBandLow = 0.06;
constexpr double kBandHigh = 0.14;
constexpr double kBandSeconds = 300.0;
// Criterion 4
constexpr double kGmmFdTol = 1e-5;
constexpr double kSmoothedFdTol = 1e-6;
constexpr int kProbes = 1000;
// Criterion 5
constexpr double kUnbiasedSe = 3.0;
// Criterion 6
constexpr double kQuadMeanTol = 1e-3;
constexpr double kQuadCovTol = 1e-2;
constexpr double kLongRunSw2 = 0.05;
// Criterion 7
constexpr double kLyapunovTol = 1e-10;
constexpr double kAffineTol = 1e-8;
// Criterion 8
constexpr double kTraceRatio = 0.9;
constexpr double kCovMatchTol = 1e-8;
// Criterion 9
constexpr double kKidSe = 3.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

SmoothingConfig smoothing(double delta, double sigma, int m) { return SmoothingConfig{delta, sigma, m}; }

Dataset2DSpec dataset(Dataset2DKind kind, Eigen::Index n, std::uint64_t seed) {
  Dataset2DSpec s;
  s.kind = kind;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

SamplerConfig sampler(double h, int iterations, Eigen::Index particles, std::uint64_t seed) {
  SamplerConfig s;
  s.step_size = h;
  s.iterations = iterations;
  s.particles = particles;
  s.seed = seed;
  s.scheme = Scheme::LeimkuhlerMatthews;
  return s;
}

// Worst invariant residuals over every iteration of one run.
struct InvariantCheck {
  double mean = 0.0;
  double gram = 0.0;
  bool finite = true;
  void observe(const ParticleState& state, const IterationDiagnostics& d) {
    mean = std::max(mean, d.mean_residual);
    gram = std::max(gram, d.gram_residual / static_cast<double>(state.y.particles()));
    finite = finite && state.y.matrix().allFinite();
  }
  bool ok() const { return finite && mean <= kMeanTol && gram <= kGramTolPerParticle; }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
  double worst_mean = 0.0, worst_gram = 0.0;
  int runs = 0;
  for (Dataset2DKind kind : {Dataset2DKind::Checkerboard, Dataset2DKind::TwoSpirals}) {
    const TrainingSet ts(generate_2d(dataset(kind, 500, 0)));
    for (Eigen::Index p : {10, 100, 5000})
      for (int t : {1, 100}) {
        InvariantCheck check;
        run(ts, smoothing(0.1, 0.2, 8), sampler(5e-4, t, p, 11),
            [&](const ParticleState& s, const IterationDiagnostics& d) { check.observe(s, d); });
        o.require(check.ok(), to_string(kind) + " P=" + std::to_string(p) + " T=" + std::to_string(t));
        worst_mean = std::max(worst_mean, check.mean);
        worst_gram = std::max(worst_gram, check.gram);
        ++runs;
      }
  }
  o.detail << runs << " runs, worst mean residual " << worst_mean << " (tol " << kMeanTol
           << "), worst Gram residual / P " << worst_gram << " (tol " << kGramTolPerParticle << ")";
}

void criterion2(Outcome& o) {
  const TrainingSet ts(generate_2d(dataset(Dataset2DKind::Checkerboard, 500, 0)));
  const Matrix reference = generate_2d(dataset(Dataset2DKind::Checkerboard, 5000, 1));
  SamplerConfig scfg = sampler(5e-4, 100, 5000, 2);
  scfg.threads = 4;
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run(ts, smoothing(0.1, 0.2, 8), scfg);
  const double secs = seconds_since(t0);
  Stream rng(2, Domain::Metric);
  const double sw2 = sliced_w2(r.samples, reference, 512, rng);
  o.require(sw2 >= kBandLow && sw2 <= kBandHigh, "SW2 outside band");
  o.require(secs <= kBandSeconds, "runtime");
  Stream floor_rng(2, Domain::Metric);
  const double floor = sliced_w2(ts.points(), reference, 512, floor_rng);
  o.detail << "SW2 " << sw2 << " in [" << kBandLow << ", " << kBandHigh << "], runtime " << secs << " s (limit "
           << kBandSeconds << " s); train-to-reference distance " << floor;

  // Informational only: the same run on a [-2, 2]^2 board.
  Dataset2DSpec half = dataset(Dataset2DKind::Checkerboard, 500, 0);
  half.extent = 2.0;
  Dataset2DSpec half_ref = half;
  half_ref.n_samples = 5000;
  half_ref.seed = 1;
  const RunResult small = run(TrainingSet(generate_2d(half)), smoothing(0.1, 0.2, 8), scfg);
  Stream small_rng(2, Domain::Metric);
  o.detail << "; extent 2 board gives SW2 " << sliced_w2(small.samples, generate_2d(half_ref), 512, small_rng);
}

void criterion3(Outcome& o) {
  const TrainingSet ts(generate_2d(dataset(Dataset2DKind::Checkerboard, 500, 0)));
  const std::vector<int> checkpoints{1, 5, 25, 100, 500};
  int cells = 0;
  double worst_mean = 0.0, worst_gram = 0.0;
  for (double h : {1e-5, 1e-4, 5e-4, 1e-3, 2e-3, 5e-3, 8e-3}) {
    InvariantCheck check;
    int reached = 0;
    try {
      run(ts, smoothing(0.1, 0.2, 8), sampler(h, checkpoints.back(), 1000, 3),
          [&](const ParticleState& s, const IterationDiagnostics& d) {
            check.observe(s, d);
            if (std::find(checkpoints.begin(), checkpoints.end(), s.iteration) != checkpoints.end() && check.ok())
              ++reached;
          });
    } catch (const Error& e) {
      o.require(false, std::string("h=") + std::to_string(h) + " threw " + e.what());
    }
    o.require(reached == static_cast<int>(checkpoints.size()), "h=" + std::to_string(h) + " incomplete or violated");
    cells += reached;
    worst_mean = std::max(worst_mean, check.mean);
    worst_gram = std::max(worst_gram, check.gram);
  }
  o.detail << cells << "/35 cells complete with finite particles; worst mean residual " << worst_mean
           << ", worst Gram residual / P " << worst_gram;
}

void criterion4(Outcome& o) {
  double worst_gmm = 0.0, worst_smooth = 0.0;
  for (Eigen::Index d : {1, 2, 10, 100}) {
    auto rng = oracle::engine(400 + static_cast<std::uint64_t>(d));
    const TrainingSet ts(oracle::gaussian(20, d, rng));
    const double delta = 0.5, fd = 1e-5;
    for (int probe = 0; probe < kProbes; ++probe) {
      const Vector z = ts.points().row(probe % 20).transpose() + oracle::gaussian(d, 1, rng, 0.5).col(0);
      const Vector g = gmm_score(ts, delta, z);
      Vector num(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        Vector zp = z, zm = z;
        zp(j) += fd;
        zm(j) -= fd;
        num(j) = (gmm_log_density(ts, delta, zp) - gmm_log_density(ts, delta, zm)) / (2 * fd);
      }
      worst_gmm = std::max(worst_gmm, (num - g).norm() / g.norm());

      if (probe % 4 != 0) continue;
      const double sigma = 0.3;
      Stream noise_rng(4, Domain::Test, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(probe));
      const Matrix noise = draw_smoothing_noise(smoothing(delta, sigma, 8), d, noise_rng);
      const Vector s = smoothed_score_with_noise(ts, delta, sigma, z, noise);
      for (Eigen::Index j = 0; j < d; ++j) {
        Vector zp = z, zm = z;
        zp(j) += fd;
        zm(j) -= fd;
        num(j) = (smoothed_potential_with_noise(ts, delta, sigma, zp, noise) -
                  smoothed_potential_with_noise(ts, delta, sigma, zm, noise)) /
                 (2 * fd);
      }
      worst_smooth = std::max(worst_smooth, (num - s).norm() / s.norm());
    }
  }
  o.require(worst_gmm <= kGmmFdTol, "gmm_score FD");
  o.require(worst_smooth <= kSmoothedFdTol, "smoothed_score FD");
  o.detail << kProbes << " probes per d in {1,2,10,100}: worst gmm relative error " << worst_gmm << " (tol "
           << kGmmFdTol << "), worst smoothed relative error " << worst_smooth << " (tol " << kSmoothedFdTol << ")";
}

void criterion5(Outcome& o) {
  auto rng = oracle::engine(500);
  const TrainingSet ts(oracle::gaussian(40, 3, rng));
  NeighborIndex idx(ts);
  int mismatches = 0;
  for (int probe = 0; probe < 200; ++probe) {
    const Vector z = oracle::gaussian(3, 1, rng).col(0);
    const SmoothingConfig cfg{0.4, 0.3, 8};
    const Eigen::Index k = 1 + probe % 39;
    Stream a(5, Domain::Score, static_cast<std::uint64_t>(probe)), b = a;
    const Vector nn = nn_smoothed_score(ts, idx, cfg, k, 40 - k, z, a);
    const Vector full = smoothed_score(ts, cfg, z, b);
    mismatches += (nn - full).norm() != 0.0;
  }
  o.require(mismatches == 0, "L = N - K equality");

  const Eigen::Index n = 200, k = 10, l = 20;
  const TrainingSet big(oracle::gaussian(n, 2, rng));
  NeighborIndex big_idx(big);
  Vector z(2), y(2);
  z << 0.3, -0.2;
  y << 0.5, 0.1;
  Stream whole(0, Domain::Test);
  const LocalSums exact = local_sums(big, select_local_subset(big_idx, z, n, 0, whole), 0.5, y);
  std::vector<double> t0, t1a, t1b;
  Stream s(6, Domain::Subset);
  for (int r = 0; r < 10000; ++r) {
    const LocalSums est = local_sums(big, select_local_subset(big_idx, z, k, l, s), 0.5, y);
    t0.push_back(est.t0);
    t1a.push_back(est.t1(0));
    t1b.push_back(est.t1(1));
  }
  const double z0 = std::abs(oracle::mean(t0) - exact.t0) / oracle::std_error(t0);
  const double z1 = std::max(std::abs(oracle::mean(t1a) - exact.t1(0)) / oracle::std_error(t1a),
                             std::abs(oracle::mean(t1b) - exact.t1(1)) / oracle::std_error(t1b));
  o.require(z0 <= kUnbiasedSe && z1 <= kUnbiasedSe, "unbiasedness");
  o.detail << "L = N - K: " << mismatches << "/200 mismatches; T0 bias " << z0 << " SE, T1 bias " << z1
           << " SE (tol " << kUnbiasedSe << ")";
}

void criterion6(Outcome& o) {
  Dataset2DSpec spec = dataset(Dataset2DKind::Circle, 32, 0);
  const TrainingSet ts(generate_2d(spec));
  const SmoothingConfig cfg = smoothing(0.1, 0.45, 8);
  const GridSpec grid = grid_for_data(ts, cfg, 0.05);
  const GridPotential pot = compute_grid_potential(ts, cfg, grid);
  const SelfConsistentResult sc = solve_tilting_selfconsistent_2d(ts, pot);
  o.require(sc.mean_error <= kQuadMeanTol, "quadrature mean");
  o.require(sc.cov_error <= kQuadCovTol, "quadrature covariance");
  const GridDensity density = grid_density_2d(pot, ts.mean(), sc.params);

  // Oracle floor: two independent quadrature draws of the run's sizes.
  Stream draw(6, Domain::Test, 1);
  const Matrix target = sample_grid_density(density, 20000, draw);
  const Matrix twin = sample_grid_density(density, 2000, draw);
  Stream p1(6, Domain::Metric, 1);
  const double floor = sliced_w2(twin, target, 512, p1);
  o.require(floor <= kLongRunSw2, "oracle floor above threshold");

  const RunResult r = run(ts, cfg, sampler(1e-4, 20000, 2000, 6));
  Stream p2(6, Domain::Metric, 2);
  const double sw2 = sliced_w2(r.samples, target, 512, p2);
  o.require(sw2 <= kLongRunSw2, "long-run SW2");
  o.detail << "Newton iterations " << sc.iterations << ", mean error " << sc.mean_error << " (tol " << kQuadMeanTol
           << "), cov error " << sc.cov_error << " (tol " << kQuadCovTol << "); SW2 particles vs quadrature " << sw2
           << " (tol " << kLongRunSw2 << ", quadrature-vs-quadrature floor " << floor << "), run "
           << r.seconds << " s";
}

void criterion7(Outcome& o) {
  auto rng = oracle::engine(700);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index d = 1 + trial % 50;
    const Matrix s = oracle::random_spd(d, rng);
    const Matrix b = oracle::random_symmetric(d, rng);
    const Matrix x = lyapunov_solve(s, b);
    worst = std::max(worst, (s * x + x * s - b).norm() / b.norm());
  }
  o.require(worst <= kLyapunovTol, "Lyapunov residual");

  const TrainingSet ts(retract(oracle::gaussian(200, 4, rng)).matrix());
  const Matrix scores = ts.points().rowwise() - ts.mean().transpose();
  const TiltingParams p = tilting_from_scores(ts, scores, 0.0);
  const double affine = std::max(p.lambda.cwiseAbs().maxCoeff(), p.quad.cwiseAbs().maxCoeff());
  o.require(affine <= kAffineTol, "affine case");
  o.detail << "worst relative Lyapunov residual " << worst << " over 1000 instances (tol " << kLyapunovTol
           << "); affine case max |lambda|, |Lambda| " << affine << " (tol " << kAffineTol << ")";
}

// Andrew's monotone chain, counter-clockwise.
std::vector<Vector> convex_hull(const Matrix& pts) {
  std::vector<std::pair<double, double>> p;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) p.emplace_back(pts(i, 0), pts(i, 1));
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  auto cross = [](auto o, auto a, auto b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  std::vector<Vector> out;
  for (const auto& [x, y] : h) out.push_back((Vector(2) << x, y).finished());
  return out;
}

bool inside_hull(const std::vector<Vector>& hull, const VectorRef& q, double tol) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vector& a = hull[i];
    const Vector& b = hull[(i + 1) % hull.size()];
    const double c = (b(0) - a(0)) * (q(1) - a(1)) - (b(1) - a(1)) * (q(0) - a(0));
    if (c < -tol * (b - a).norm()) return false;
  }
  return true;
}

void criterion8(Outcome& o) {
  const TrainingSet ts(generate_2d(dataset(Dataset2DKind::Checkerboard, 500, 0)));
  const std::vector<Vector> hull = convex_hull(ts.points());
  CfdmConfig c;
  c.sigma = 0.4;
  c.mc_samples = 32;
  c.particles = 2000;
  c.steps = 100;
  c.seed = 8;
  long outside = 0;
  const Matrix out = sigma_cfdm_run(ts, c, [&](int, double t, const Matrix&, const Matrix& targets) {
    std::vector<Vector> scaled;
    for (const Vector& v : hull) scaled.push_back(t * v);
    for (Eigen::Index i = 0; i < targets.rows(); ++i)
      outside += !inside_hull(scaled, targets.row(i).transpose(), 1e-12);
  });
  const double ratio = TrainingSet(out).cov().trace() / ts.cov().trace();
  o.require(ratio < kTraceRatio, "CFDM trace ratio");
  o.require(outside == 0, "barycenter containment");

  const RunResult r = run(ts, smoothing(0.1, 0.4, 32), sampler(5e-4, 20, 2000, 8));
  const double cov_err = oracle::rel_err(TrainingSet(r.samples).cov(), ts.cov());
  o.require(cov_err <= kCovMatchTol, "MM-SOLD covariance");
  o.detail << "sigma-CFDM trace ratio " << ratio << " (< " << kTraceRatio << "), " << outside
           << " drift targets outside the scaled hull over 100 steps; MM-SOLD covariance relative error "
           << cov_err << " (tol " << kCovMatchTol << ")";
}

void criterion9(Outcome& o) {
  auto rng = oracle::engine(900);
  const Matrix a = oracle::gaussian(300, 3, rng), b = oracle::gaussian(200, 3, rng, 1.7);
  Stream s(9, Domain::Metric);
  const Matrix dirs = random_directions(256, 3, s);
  const double ab = sliced_w2_with_directions(a, b, dirs);
  o.require(sliced_w2_with_directions(a, a, dirs) == 0.0, "SW2 identity");
  o.require(std::abs(sliced_w2_with_directions(b, a, dirs) - ab) <= 1e-14 * ab, "SW2 symmetry");
  o.require(std::abs(sliced_w2_with_directions(3.0 * a, 3.0 * b, dirs) - 3.0 * ab) <= 1e-12 * ab, "SW2 scale");

  std::vector<double> kid;
  for (int r = 0; r < 200; ++r) {
    const Matrix pool = oracle::gaussian(100, 4, rng);
    kid.push_back(kid_poly(pool.topRows(50), pool.bottomRows(50)));
  }
  const double kid_z = std::abs(oracle::mean(kid)) / oracle::std_error(kid);
  o.require(kid_z <= kKidSe, "KID unbiasedness");

  const Matrix test = oracle::gaussian(100, 2, rng);
  const Matrix far = Matrix::Constant(10, 2, 1e3);
  Matrix planted(60, 2);
  planted << test.topRows(50), far;
  const bool recall_ok = recall_knn(test, test, 3) == 1.0 && recall_knn(test, far, 3) == 0.0 &&
                         recall_knn(test, planted, 3) >= 0.5;
  o.require(recall_ok, "recall cases");
  Matrix half(20, 2);
  half << test.topRows(10), far;
  const bool dup_ok = dup_rate(test, test, 5) == 1.0 && dup_rate(test, far, 5) == 0.0 && dup_rate(test, half, 5) == 0.5;
  o.require(dup_ok, "dup_rate cases");
  o.detail << "SW2 identity/symmetry/scale hold; KID mean over 200 same-law splits " << oracle::mean(kid) << " ("
           << kid_z << " SE, tol " << kKidSe << "); recall and dup_rate cases " << (recall_ok && dup_ok ? "exact" : "wrong");
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void(Outcome&)>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("CRITERION %d: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
