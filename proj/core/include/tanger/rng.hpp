#pragma once

#include <cstdint>
#include <string_view>

namespace tanger {

// Counter-based pseudo-randomness.  Every consumer derives values from an
// explicit 64-bit key, so identical keys give identical streams on every
// platform and no global state is involved.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  // Mix the seed before adding the value: combining nearby seeds with small
  // values must not alias (splitmix64 alone is a bijection, so a thin affine
  // inner term would let (seed, v) and (seed', v') collide for whole ranges
  // of v — e.g. dataset seeds 9001 and 9002 sharing most of their samples).
  return splitmix64(splitmix64(seed) + v);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

// Stateless generator: the i-th draw under a key is a pure function of
// (key, i).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ ^ (counter * 0xD1B54A32D192ED03ull + 0x2545F4914F6CDD1Dull));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + uniform(counter) * (hi - lo);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return bits(counter) % n;
  }

 private:
  std::uint64_t key_;
};

// Sequential convenience wrapper over CounterRng.
class SeqRng {
 public:
  explicit SeqRng(std::uint64_t key) : rng_(key) {}

  std::uint64_t next_bits() { return rng_.bits(counter_++); }
  double next_uniform() { return rng_.uniform(counter_++); }
  double next_uniform(double lo, double hi) { return rng_.uniform(counter_++, lo, hi); }
  std::uint64_t next_below(std::uint64_t n) { return rng_.below(counter_++, n); }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace tanger
