#include "cltv/rng.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace cltv {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  assert(lo <= hi);
  return lo + (hi - lo) * uniform01();
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  // Rejection sampling over the top 32 bits keeps the draw unbiased.
  uint64_t bound = static_cast<uint64_t>(n);
  uint64_t limit = (~0ULL / bound) * bound;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is bounded away from 0 so log stays finite.
  double u1 = uniform01();
  if (u1 < 1e-300) u1 = 1e-300;
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

bool Rng::bernoulli(double p) {
  return uniform01() < p;
}

std::vector<double> Rng::simplex(int n, double min_mass) {
  if (n <= 0) throw std::invalid_argument("Rng::simplex: n must be positive");
  if (min_mass < 0.0 || min_mass * n >= 1.0) {
    throw std::invalid_argument("Rng::simplex: min_mass out of range");
  }
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) {
    v = uniform01() + 1e-9;
    total += v;
  }
  double free_mass = 1.0 - min_mass * n;
  for (auto& v : w) v = min_mass + free_mass * (v / total);
  return w;
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t basis) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = basis;
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(std::string_view bytes) {
  return fnv1a64(bytes.data(), bytes.size(), 0xcbf29ce484222325ULL);
}

uint64_t derive_seed(uint64_t root_seed, std::string_view component) {
  return splitmix64(splitmix64(root_seed) ^ fnv1a64(component));
}

}  // namespace cltv
