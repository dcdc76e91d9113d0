#pragma once

#include <cmath>
#include <cstdint>

namespace locomanip {

// splitmix64: tiny, fast, and fully pinned down so streams are reproducible
// across platforms and thread counts. Every consumer (env, sampler, noise
// model) owns its own Rng derived from the run seed, so parallel rollouts
// never share generator state.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; caches the second variate.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Deterministic child stream: hash of (parent seed material, index).
  static uint64_t derive_seed(uint64_t base, uint64_t index) {
    Rng mix(base ^ (0xD1B54A32D192ED03ull * (index + 1)));
    mix.next_u64();
    return mix.next_u64();
  }

  // Full generator state, including the Box-Muller carry, so a restored
  // stream continues bit-exact.
  void save_state(uint64_t& state, double& cache, bool& has_cache) const {
    state = state_;
    cache = cache_;
    has_cache = has_cache_;
  }
  void load_state(uint64_t state, double cache, bool has_cache) {
    state_ = state;
    cache_ = cache;
    has_cache_ = has_cache;
  }

 private:
  uint64_t state_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace locomanip
