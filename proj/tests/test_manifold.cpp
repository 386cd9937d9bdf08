#include "doctest.h"
#include "mmsold/error.hpp"
#include "mmsold/gmm.hpp"
#include "mmsold/manifold.hpp"
#include "oracles.hpp"

using namespace mmsold;

namespace {

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

ManifoldPoint random_point(Eigen::Index p, Eigen::Index d, std::mt19937_64& rng) {
  return retract(oracle::gaussian(p, d, rng));
}

WhiteningMap random_map(Eigen::Index d, std::mt19937_64& rng) {
  const Matrix s = oracle::random_spd(d, rng);
  return WhiteningMap(oracle::gaussian(d, 1, rng).col(0), cholesky(s).chol);
}

}  // namespace

TEST_CASE("whitening examples and round trip") {
  auto rng = oracle::engine(41);
  const WhiteningMap map = random_map(3, rng);
  Matrix at_mean(4, 3);
  at_mean.rowwise() = map.mean().transpose();
  CHECK(map.whiten(at_mean).norm() < 1e-14);

  const WhiteningMap identity(Vector::Zero(3), Matrix::Identity(3, 3));
  const Matrix z = oracle::gaussian(5, 3, rng);
  CHECK((identity.whiten(z) - z).norm() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const WhiteningMap m = random_map(1 + trial % 6, rng);
    const Matrix zz = oracle::gaussian(9, 1 + trial % 6, rng, 3.0);
    CHECK(oracle::rel_err(m.unwhiten(m.whiten(zz)), zz) <= 1e-10);
  }
}

TEST_CASE("tangent projection examples") {
  auto rng = oracle::engine(42);
  const ManifoldPoint y = random_point(10, 3, rng);
  Matrix constant(10, 3);
  constant.rowwise() = RowVector::LinSpaced(3, 1.0, 3.0);
  CHECK(project_tangent(y, constant).norm() < 1e-13);
  CHECK(project_tangent(y, y.matrix()).norm() <= 1e-10 * y.matrix().norm());
}

TEST_CASE("tangent projection is an orthogonal projection onto the tangent space") {
  auto rng = oracle::engine(43);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 1 + trial % 5, p = d + 1 + trial % 20;
    const ManifoldPoint y = random_point(p, d, rng);
    const Matrix a = oracle::gaussian(p, d, rng), b = oracle::gaussian(p, d, rng);
    const Matrix t = project_tangent(y, a);
    const double scale = a.norm();
    CHECK(t.colwise().sum().cwiseAbs().maxCoeff() <= 1e-8 * scale);
    const Matrix skew = y.matrix().transpose() * t + t.transpose() * y.matrix();
    CHECK(skew.cwiseAbs().maxCoeff() <= 1e-8 * scale);
    CHECK((project_tangent(y, t) - t).norm() <= 1e-10 * scale);
    CHECK(std::abs(inner(t, b) - inner(a, project_tangent(y, b))) <= 1e-10 * scale * b.norm());
  }
}

TEST_CASE("retraction examples and invariants") {
  auto rng = oracle::engine(44);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + trial % 4, p = d + 1 + 3 * trial;
    const ManifoldPoint y = random_point(p, d, rng);
    CHECK(y.on_manifold());
    CHECK((retract(y.matrix()).matrix() - y.matrix()).norm() <= 1e-10 * y.matrix().norm());
    CHECK((retract(2.0 * y.matrix()).matrix() - y.matrix()).norm() <= 1e-10 * y.matrix().norm());
    const ManifoldPoint moved = retract(y.matrix() + 0.01 * oracle::gaussian(p, d, rng));
    CHECK(moved.on_manifold());
    const auto r = moved.residual();
    CHECK(r.mean <= 1e-8 * std::sqrt(static_cast<double>(p)));
    CHECK(r.gram <= 1e-6 * static_cast<double>(p));
    CHECK((retract(moved.matrix()).matrix() - moved.matrix()).norm() <= 1e-10 * moved.matrix().norm());
  }
}

TEST_CASE("retraction and construction errors") {
  Matrix collapsed = Matrix::Ones(5, 2);
  try {
    retract(collapsed);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficient);
  }
  CHECK_THROWS_AS(ManifoldPoint(Matrix::Identity(2, 2) * std::sqrt(2.0)), Error);
  auto rng = oracle::engine(45);
  CHECK_THROWS_AS(ManifoldPoint(oracle::gaussian(10, 2, rng)), Error);
  CHECK_THROWS_AS(retract(Matrix::Identity(2, 2)), Error);
}

TEST_CASE("constraint equivalence with data-space moments") {
  auto rng = oracle::engine(46);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 2 + trial % 3, p = 40;
    const Matrix x = oracle::gaussian(200, d, rng, 2.0);
    const TrainingSet ts(x);
    const WhiteningMap map(ts.mean(), ts.cholesky().chol);

    const ManifoldPoint y = random_point(p, d, rng);
    const Matrix z = map.unwhiten(y.matrix());
    const TrainingSet moments(z);
    CHECK((moments.mean() - ts.mean()).cwiseAbs().maxCoeff() <= 1e-10 * (1 + ts.mean().norm()));
    CHECK(oracle::rel_err(moments.cov(), ts.cov()) <= 1e-10);

    // Matching moments implies the whitened matrix satisfies the constraints.
    CHECK(satisfies_constraints(map.whiten(z)));
    const Matrix off = oracle::gaussian(p, d, rng);
    CHECK_FALSE(satisfies_constraints(off));
    CHECK(oracle::rel_err(TrainingSet(map.unwhiten(off)).cov(), ts.cov()) > 1e-3);
  }
}

TEST_CASE("gradient pullback") {
  auto rng = oracle::engine(47);
  const WhiteningMap identity(Vector::Zero(2), Matrix::Identity(2, 2));
  const Matrix g = oracle::gaussian(6, 2, rng);
  CHECK((identity.pullback_gradient(g) - g).norm() == 0.0);
  const WhiteningMap map = random_map(2, rng);
  CHECK(map.pullback_gradient(Matrix::Zero(6, 2)).norm() == 0.0);

  const TrainingSet ts(oracle::gaussian(15, 2, rng));
  const WhiteningMap tmap(ts.mean(), ts.cholesky().chol);
  const double delta = 0.6;
  auto total_potential = [&](const Matrix& y) {
    const Matrix z = tmap.unwhiten(y);
    double v = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) v -= gmm_log_density(ts, delta, z.row(i).transpose());
    return v;
  };
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix y = oracle::gaussian(8, 2, rng);
    const Matrix h = oracle::gaussian(8, 2, rng);
    const Matrix z = tmap.unwhiten(y);
    Matrix gz(8, 2);
    for (Eigen::Index i = 0; i < 8; ++i) gz.row(i) = -gmm_score(ts, delta, z.row(i).transpose()).transpose();
    const double analytic = inner(tmap.pullback_gradient(gz), h);
    const double t = 1e-5;
    const double fd = (total_potential(y + t * h) - total_potential(y - t * h)) / (2 * t);
    CHECK(std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}
