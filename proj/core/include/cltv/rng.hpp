#ifndef CLTV_RNG_HPP
#define CLTV_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace cltv {

/**
 * Deterministic random stream. All stochastic components in the library draw
 * from an Rng instead of std:: distributions so that every sampled value is
 * pinned by this code alone and identical across runs of the same build.
 */
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). Requires n > 0.
  int uniform_int(int n);

  /// Standard normal via Box-Muller, one cached spare.
  double normal();
  double normal(double mean, double stddev);

  /// True with probability p.
  bool bernoulli(double p);

  /// Random probability vector of length n with every entry >= min_mass.
  std::vector<double> simplex(int n, double min_mass = 0.0);

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// FNV-1a hash, also used for config and environment fingerprints.
uint64_t fnv1a64(std::string_view bytes);
uint64_t fnv1a64(const void* data, size_t n, uint64_t basis);

uint64_t splitmix64(uint64_t x);

/**
 * Named sub-seed derivation. Every stochastic component of a run owns a
 * stream derived from the single top-level seed and the component name, so
 * adding or removing one component never shifts the draws of another.
 */
uint64_t derive_seed(uint64_t root_seed, std::string_view component);

inline Rng substream(uint64_t root_seed, std::string_view component) {
  return Rng(derive_seed(root_seed, component));
}

}  // namespace cltv

#endif  // CLTV_RNG_HPP
