#pragma once

#include <cstdint>

// Deterministic random number utilities. Everything here is a pure function
// of its inputs so that any run can be reproduced from the top-level seed:
// sub-streams are derived by key, never by sharing generator state.
namespace seqsynth::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and up to three keys.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t k0,
                            std::uint64_t k1 = 0, std::uint64_t k2 = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x632be59bd9b4e019ULL);
  h = splitmix64(h ^ k0);
  h = splitmix64(h ^ k1);
  h = splitmix64(h ^ k2);
  return h;
}

// xoshiro-free minimal PCG-style engine; the standard distributions are not
// used anywhere because their outputs are implementation-defined.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : state_(splitmix64(seed ^ 0x853c49e6748fea9bULL)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace seqsynth::rng
