#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace pugnn {

// Deterministic, platform-independent RNG built on splitmix64.
// All randomness in the project flows through this type so that results are
// bit-identical across runs and standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  // Independent substream for (seed, stream_id), e.g. per-player streams.
  static Rng substream(uint64_t seed, uint64_t stream_id) {
    Rng r(mix(seed) ^ mix(stream_id * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL));
    return r;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is negligible for the n used here.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  int uniform_int(int lo, int hi_inclusive) { return lo + uniform_int(hi_inclusive - lo + 1); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, no cached spare so the stream position stays predictable.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  // Knuth's method; fine for the small rates used by the generator.
  int poisson(double lambda) {
    double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
  }

  uint64_t state_;
};

}  // namespace pugnn
