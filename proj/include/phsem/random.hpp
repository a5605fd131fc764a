#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace phsem {

// Seeded random source with deterministic substreams. A substream is a pure
// function of (seed, keys...), so work keyed by path and iteration draws the
// same numbers regardless of the order in which it is scheduled.
class RandomStream {
 public:
  using Engine = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RandomStream substream(std::initializer_list<std::uint64_t> keys) const {
    std::uint64_t state = mix(seed_ ^ 0x6a09e667f3bcc908ULL);
    for (auto key : keys) state = mix(state ^ mix(key + 0x9e3779b97f4a7c15ULL));
    return RandomStream(state);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
  Engine& engine() { return engine_; }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  Engine engine_;
};

}  // namespace phsem
