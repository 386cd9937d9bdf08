#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "mmsold/types.hpp"

namespace mmsold {

/// Which part of a run a substream feeds. Distinct domains never share draws.
enum class Domain : std::uint64_t {
  Init = 1,
  InitNoise = 2,
  Score = 3,
  Langevin = 4,
  Subset = 5,
  Tilting = 6,
  Metric = 7,
  Baseline = 8,
  Frozen = 9,
  Test = 10,
};

/// xoshiro256** engine. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// A reproducible random stream identified by (seed, domain, a, b). Two streams
/// with the same key produce identical draws no matter when or on which thread
/// they are created, which is what makes batch evaluation schedule-independent.
class Stream {
 public:
  Stream(std::uint64_t seed, Domain domain, std::uint64_t a = 0, std::uint64_t b = 0);

  /// Child stream keyed by this stream's key plus `tag`.
  Stream split(std::uint64_t tag) const;

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Row-major fill, so a vector and a 1 x n block see the same draws.
  template <class Derived>
  void fill_normal(Eigen::DenseBase<Derived>&& out) { fill_normal(out); }
  template <class Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = normal();
  }

  std::uint64_t key() const { return key_; }

 private:
  explicit Stream(std::uint64_t key);

  std::uint64_t key_;
  Xoshiro256 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mmsold
