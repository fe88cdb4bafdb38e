#pragma once

#include <cstdint>
#include <random>

namespace ssvs {

// Random stream used everywhere in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The std::*_distribution adaptors are implementation-defined, so
// all variates are produced here from the raw 64-bit stream with documented
// mappings:
//   uniform()  : (x >> 11) * 2^-53 + 2^-54, i.e. the midpoint grid in (0, 1)
//   normal()   : Box-Muller, two uniforms per draw, cosine branch only
//   gamma(a)   : Marsaglia-Tsang for a >= 1, boosted via U^(1/a) for a < 1
//   poisson(m) : inversion (one uniform) for m < 50, PTRS otherwise
// so a given seed yields the same draws on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate);

  // Gamma(shape, rate = 1).
  double gamma(double shape);
  // log of a Gamma(shape, 1) draw, stable for very small shapes where the
  // draw itself underflows.
  double log_gamma_variate(double shape);

  double poisson(double mean);

  // Negative binomial with mean mu and overdispersion size (Var = mu + mu^2/size),
  // drawn as a Poisson-gamma mixture.
  double negative_binomial(double mu, double size);

  // N(0, sd^2) truncated to (0, inf).
  double half_normal(double sd);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ssvs
