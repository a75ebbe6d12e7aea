#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace qhmm {

// splitmix64; used to derive independent per-job seeds from (seed, tags).
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix_seed(seed);
  s = mix_seed(s ^ mix_seed(a + 0x21fd76f8e8968859ULL));
  s = mix_seed(s ^ mix_seed(b + 0x7b2d4d51276e1c3dULL));
  s = mix_seed(s ^ mix_seed(c + 0x3c6ef372fe94f82bULL));
  return s;
}

// mt19937_64 with hand-rolled variate transforms. std::*_distribution output
// is implementation-defined, which would break byte-identical seeded reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo bias is negligible for n << 2^64; keep exact via
    // rejection to stay defensible for tests that count frequencies.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double exponential() {  // mean 1
    double u = uniform();
    return -std::log1p(-u);
  }

  double chisq2() { return 2.0 * exponential(); }

  double student_t3() {
    double z = normal();
    double a = normal(), b = normal(), c = normal();
    double s = a * a + b * b + c * c;
    while (s <= 0.0) {
      a = normal();
      b = normal();
      c = normal();
      s = a * a + b * b + c * c;
    }
    return z * std::sqrt(3.0 / s);
  }

  // Asymmetric Laplace with location 0, scale sigma, asymmetry tau:
  // density tau(1-tau)/sigma * exp(-rho_tau(u/sigma)). P(U >= 0) = 1 - tau.
  double ald(double sigma, double tau) {
    if (uniform() < 1.0 - tau) {
      return sigma * exponential() / tau;
    }
    return -sigma * exponential() / (1.0 - tau);
  }

  // index sampled from a probability vector (sums to ~1)
  int categorical(const double* probs, int n) {
    double u = uniform();
    double acc = 0.0;
    for (int k = 0; k < n - 1; ++k) {
      acc += probs[k];
      if (u < acc) return k;
    }
    return n - 1;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qhmm
