#include <atomic>
#include <set>

#include "doctest.h"
#include "mmsold/parallel.hpp"
#include "mmsold/random.hpp"
#include "oracles.hpp"

using namespace mmsold;

TEST_CASE("streams with equal keys agree, different keys differ") {
  Stream a(7, Domain::Score, 3, 4), b(7, Domain::Score, 3, 4);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

  std::set<std::uint64_t> keys;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t x = 0; x < 16; ++x)
      for (std::uint64_t y = 0; y < 16; ++y) {
        keys.insert(Stream(s, Domain::Score, x, y).key());
        keys.insert(Stream(s, Domain::Langevin, x, y).key());
      }
  CHECK(keys.size() == 4 * 16 * 16 * 2);
  CHECK(Stream(1, Domain::Init).split(5).key() == Stream(1, Domain::Init).split(5).key());
  CHECK(Stream(1, Domain::Init).split(5).key() != Stream(1, Domain::Init).split(6).key());
}

TEST_CASE("normal draws have unit moments") {
  Stream rng(1, Domain::Test);
  std::vector<double> x(200000);
  for (auto& v : x) v = rng.normal();
  const double m = oracle::mean(x);
  double var = 0.0;
  for (double v : x) var += (v - m) * (v - m);
  var /= static_cast<double>(x.size() - 1);
  CHECK(std::abs(m) < 4.0 / std::sqrt(200000.0));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / 200000.0));
}

TEST_CASE("below is uniform") {
  Stream rng(2, Domain::Test);
  const int n = 7, draws = 70000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) counts[rng.below(n)]++;
  const double p = 1.0 / n, se = std::sqrt(draws * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - draws * p) < 4.0 * se);
}

TEST_CASE("fill_normal matches sequential draws for vectors and row blocks") {
  Vector v(5);
  Stream(3, Domain::Test).fill_normal(v);
  Matrix m = Matrix::Zero(2, 5);
  Stream(3, Domain::Test).fill_normal(m.row(1));
  Stream seq(3, Domain::Test);
  for (int i = 0; i < 5; ++i) {
    const double x = seq.normal();
    CHECK(v(i) == x);
    CHECK(m(1, i) == x);
  }
  CHECK(m.row(0).norm() == 0.0);
}

TEST_CASE("parallel_for covers every index once for any thread count") {
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(1001);
    parallel_for(1001, threads, [&](Eigen::Index i) { hits[static_cast<std::size_t>(i)]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS(parallel_for(10, 2, [](Eigen::Index i) {
    if (i == 7) throw std::runtime_error("boom");
  }));
}
