#include <cmath>

#include "doctest.h"
#include "mmsold/baselines.hpp"
#include "mmsold/error.hpp"
#include "oracles.hpp"

using namespace mmsold;

TEST_CASE("schedules") {
  const TimeIndexedGmm s = TimeIndexedGmm::straight();
  CHECK(s.mean_scale(0.25) == 0.25);
  CHECK(s.std_dev(0.25) == 0.75);
  CHECK(s.std_dev(1.0 - 1e-9) == doctest::Approx(1e-9).epsilon(1e-6));

  const TimeIndexedGmm ou = TimeIndexedGmm::ornstein_uhlenbeck(2.0);
  CHECK(ou.mean_scale(0.0) == 1.0);
  CHECK(ou.std_dev(0.0) == 0.0);
  CHECK(ou.mean_scale(50.0) < 1e-40);
  CHECK(ou.std_dev(50.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(ou.std_dev(1e-8) == doctest::Approx(std::sqrt(2e-8)).epsilon(1e-6));
  CHECK_THROWS_AS(TimeIndexedGmm::ornstein_uhlenbeck(0.0), Error);
}

TEST_CASE("time-indexed score is the gradient of the log-sum") {
  auto rng = oracle::engine(81);
  const TrainingSet ts(oracle::gaussian(7, 3, rng));
  for (const TimeIndexedGmm& g : {TimeIndexedGmm::straight(), TimeIndexedGmm::ornstein_uhlenbeck(0.7)}) {
    const double t = 0.4;
    const Vector z = oracle::gaussian(3, 1, rng).col(0);
    const Vector s = time_indexed_score(g, ts, t, z);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < 3; ++j) {
      Vector zp = z, zm = z;
      zp(j) += h;
      zm(j) -= h;
      const double fd = (time_indexed_log_sum(g, ts, t, zp) - time_indexed_log_sum(g, ts, t, zm)) / (2 * h);
      CHECK(s(j) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("time-indexed mean lies in the scaled data hull") {
  auto rng = oracle::engine(82);
  const TrainingSet ts(oracle::gaussian(10, 2, rng));
  const double t = 0.3;
  for (int r = 0; r < 20; ++r) {
    const Vector z = oracle::gaussian(2, 1, rng, 5.0).col(0);
    const Vector c = time_indexed_mean(TimeIndexedGmm::straight(), ts, t, z);
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(c(j) <= t * ts.points().col(j).maxCoeff() + 1e-12);
      CHECK(c(j) >= t * ts.points().col(j).minCoeff() - 1e-12);
    }
  }
}

TEST_CASE("sigma-CFDM with one training point follows the exact linear flow") {
  // The flow z(t) = t x + (z0 - t0 x)(1 - t)/(1 - t0) is linear in t, so Euler is exact.
  Matrix x(1, 2);
  x << 1.5, -0.5;
  const TrainingSet ts(x);
  CfdmConfig cfg;
  cfg.particles = 16;
  cfg.seed = 3;
  cfg.steps = 1;
  const Matrix one = sigma_cfdm_run(ts, cfg);
  cfg.steps = 37;
  const Matrix many = sigma_cfdm_run(ts, cfg);
  CHECK((one - many).cwiseAbs().maxCoeff() <= 1e-10);
  const double shrink = (1.0 - cfg.t_end) / (1.0 - cfg.t_start);
  const Matrix offset = many.rowwise() - cfg.t_end * x.row(0);
  CHECK(offset.rowwise().norm().maxCoeff() <= shrink * (7.0 + cfg.t_start * x.norm()));
}

TEST_CASE("sigma-CFDM determinism and noise use") {
  auto rng = oracle::engine(83);
  const TrainingSet ts(oracle::gaussian(20, 2, rng));
  CfdmConfig cfg;
  cfg.steps = 20;
  cfg.particles = 30;
  cfg.seed = 4;
  const Matrix a = sigma_cfdm_run(ts, cfg);
  CfdmConfig more = cfg;
  more.mc_samples = 16;
  CHECK((sigma_cfdm_run(ts, more) - a).norm() == 0.0);

  cfg.sigma = 0.3;
  cfg.mc_samples = 4;
  const Matrix b = sigma_cfdm_run(ts, cfg);
  CfdmConfig threaded = cfg;
  threaded.threads = 3;
  CHECK((sigma_cfdm_run(ts, cfg) - b).norm() == 0.0);
  CHECK((sigma_cfdm_run(ts, threaded) - b).norm() == 0.0);
  CHECK((b - a).norm() > 0.0);

  int calls = 0;
  sigma_cfdm_run(ts, cfg, [&](int k, double t, const Matrix& z, const Matrix& targets) {
    CHECK(k == calls);
    CHECK(t == doctest::Approx(cfg.t_start + k * (cfg.t_end - cfg.t_start) / cfg.steps));
    CHECK(z.rows() == 30);
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(targets.col(j).maxCoeff() <= t * ts.points().col(j).maxCoeff() + 1e-12);
      CHECK(targets.col(j).minCoeff() >= t * ts.points().col(j).minCoeff() - 1e-12);
    }
    ++calls;
  });
  CHECK(calls == 20);

  CfdmConfig bad = cfg;
  bad.t_end = 1.0;
  CHECK_THROWS_AS(sigma_cfdm_run(ts, bad), Error);
}

TEST_CASE("BAOAB with zero steps returns the start") {
  auto rng = oracle::engine(84);
  const Matrix init = oracle::gaussian(5, 2, rng);
  BaoabConfig cfg;
  cfg.iterations = 0;
  const Matrix out = baoab_integrate(init, [](const VectorRef& z, int, Eigen::Index) -> Vector { return z; }, cfg);
  CHECK((out - init).norm() == 0.0);
}

TEST_CASE("BAOAB samples a quadratic target exactly in configuration") {
  Matrix a(2, 2);
  a << 1.0, 0.0, 0.0, 4.0;
  BaoabConfig cfg;
  cfg.step_size = 0.3;
  cfg.iterations = 400;
  cfg.particles = 20000;
  const Matrix init = Matrix::Zero(cfg.particles, 2);
  const Matrix out = baoab_integrate(init, [&](const VectorRef& z, int, Eigen::Index) -> Vector { return a * z; }, cfg);
  const TrainingSet m(out);
  const double se = std::sqrt(2.0 / static_cast<double>(cfg.particles));
  CHECK(std::abs(m.cov()(0, 0) - 1.0) <= 4 * se);
  CHECK(std::abs(m.cov()(1, 1) - 0.25) <= 4 * se * 0.25);
  CHECK(m.mean().cwiseAbs().maxCoeff() <= 4 / std::sqrt(static_cast<double>(cfg.particles)));
}

TEST_CASE("BAOAB bias shrinks with the step on an anharmonic target") {
  // U = z^4 / 4 in 1D; E[z^2] = Gamma(3/4) / Gamma(1/4) * 2.
  const double truth = 2.0 * std::tgamma(0.75) / std::tgamma(0.25);
  std::vector<double> err;
  for (double h : {0.33, 0.1}) {
    BaoabConfig cfg;
    cfg.step_size = h;
    cfg.iterations = static_cast<int>(30 / h);
    cfg.particles = 400000;
    cfg.seed = 11;
    const Matrix out = baoab_integrate(Matrix::Zero(cfg.particles, 1),
                                       [](const VectorRef& z, int, Eigen::Index) -> Vector {
                                         return z.array().cube().matrix();
                                       },
                                       cfg);
    err.push_back(std::abs(out.col(0).squaredNorm() / static_cast<double>(cfg.particles) - truth));
  }
  CHECK(err[1] < err[0]);
}

TEST_CASE("kinetic Langevin on a single training point targets N(x, delta^2 I)") {
  Matrix x(1, 2);
  x << 0.5, -1.0;
  const TrainingSet ts(x);
  const SmoothingConfig cfg{0.3, 0.0, 2};
  TiltingParams zero{Vector::Zero(2), Matrix::Zero(2, 2), 0.0, Provenance::Empirical};
  BaoabConfig bcfg;
  bcfg.step_size = 0.05;
  bcfg.iterations = 300;
  bcfg.particles = 8000;
  const Matrix out = kinetic_langevin_baoab(ts, cfg, zero, bcfg);
  const TrainingSet m(out);
  CHECK((m.mean() - x.row(0).transpose()).cwiseAbs().maxCoeff() <= 4 * 0.3 / std::sqrt(8000.0));
  const double se = 0.09 * std::sqrt(2.0 / 8000.0);
  CHECK(std::abs(m.cov()(0, 0) - 0.09) <= 4 * se);
  CHECK(std::abs(m.cov()(1, 1) - 0.09) <= 4 * se);

  BaoabConfig bad = bcfg;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(kinetic_langevin_baoab(ts, cfg, zero, bad), Error);
}
