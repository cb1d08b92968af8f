#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "pettrace/bytes.hpp"

namespace pet {

// Deterministic RNG for simulation and tests. splitmix64 core: one u64 of
// state, full period, cheap to fork. Not a CSPRNG; the protocol's security
// argument does not rest on this generator, reproducibility does.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Unbiased value in [0, bound) via rejection sampling. bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform: bound must be positive");
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v >= threshold) return v % bound;
    }
  }

  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

  void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t v = next_u64();
      for (int s = 56; s >= 0 && i < out.size(); s -= 8) out[i++] = static_cast<std::uint8_t>(v >> s);
    }
  }

  std::array<std::uint8_t, 32> bytes32() {
    std::array<std::uint8_t, 32> out{};
    fill(out);
    return out;
  }

  // Independent child stream. Advances this generator once, so repeated
  // forks with the same tag still yield distinct children.
  Rng fork(std::uint64_t tag) {
    std::uint64_t mixed = next_u64() ^ (tag * 0xD6E8FEB86659FD93ull + 0x2545F4914F6CDD1Dull);
    return Rng(mixed);
  }

  template <class It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = uniform(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  std::uint64_t state() const { return state_; }
  static Rng from_state(std::uint64_t s) { return Rng(s); }

 private:
  std::uint64_t state_;
};

}  // namespace pet
