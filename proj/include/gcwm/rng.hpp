#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace gcwm::rng {

// Mixing function used to derive independent stream seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (stream * 0x9e3779b97f4a7c15ULL + 1));
}

// Deterministic generator: mt19937_64 core (bit-exact across platforms by
// the standard) with hand-rolled samplers so no implementation-defined
// distribution code enters the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on (0, 1]: never returns 0, so log() is always finite.
  double uniform() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1p-53;
  }

  // Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mu, double sd) { return mu + sd * normal(); }

  int bernoulli(double p) { return uniform() <= p ? 1 : 0; }

  // Inversion for small rates; larger rates are split into chunks whose
  // independent Poisson draws sum to the requested rate exactly in law.
  int poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: rate < 0");
    int total = 0;
    while (lambda > 30.0) {
      total += poisson_inversion(15.0);
      lambda -= 15.0;
    }
    return total + poisson_inversion(lambda);
  }

  // Index into probs by cumulative inversion. probs need not be normalized.
  int categorical(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform() * total;
    double cum = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      cum += probs[j];
      if (u <= cum) return static_cast<int>(j);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  int poisson_inversion(double lambda) {
    if (lambda <= 0.0) return 0;
    double p = std::exp(-lambda);
    double cum = p;
    int k = 0;
    double u = uniform();
    while (u > cum && k < 100000) {
      ++k;
      p *= lambda / k;
      cum += p;
    }
    return k;
  }

  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gcwm::rng
