#include "mmsold/random.hpp"

namespace mmsold {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void Xoshiro256::reseed(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

namespace {

std::uint64_t mix(std::uint64_t key, std::uint64_t value) {
  std::uint64_t state = key ^ (value + 0x632be59bd9b4e019ULL);
  return splitmix64(state);
}

}  // namespace

Stream::Stream(std::uint64_t seed, Domain domain, std::uint64_t a, std::uint64_t b)
    : Stream(mix(mix(mix(mix(0x5eed5eed5eed5eedULL, seed), static_cast<std::uint64_t>(domain)), a),
                 b)) {}

Stream::Stream(std::uint64_t key) : key_(key), engine_(key) {}

Stream Stream::split(std::uint64_t tag) const { return Stream(mix(key_, tag)); }

std::uint64_t Stream::below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace mmsold
