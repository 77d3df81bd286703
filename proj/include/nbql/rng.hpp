#pragma once

#include <cstdint>
#include <random>

namespace nbql {

// All randomness flows through Rng. Uniform draws are computed from the raw
// 64-bit engine output so that streams are identical across standard
// libraries (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Lemire-free modulo rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child streams of a root seed. stream ids are fixed per consumer:
//   0 = environment noise, 1 = candidate pool sampling, 2 = env construction.
constexpr std::uint64_t child_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(root) ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
}

namespace stream {
inline constexpr std::uint64_t kEnvNoise = 0;
inline constexpr std::uint64_t kPool = 1;
inline constexpr std::uint64_t kEnvBuild = 2;
}  // namespace stream

}  // namespace nbql
