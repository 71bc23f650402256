#pragma once

// Seeded random number generation and seed derivation.
//
// Everything in the harness that consumes randomness does so through an
// explicit Rng instance seeded from a derived 64-bit seed, so that results
// are reproducible bit-for-bit across reruns and independent of scheduling.
// The generator and all samplers are implemented here (not delegated to
// std::<random> distributions) so that streams are identical across
// standard library implementations.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace hte::rng {

// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: a pure function of (master, components).
// Component position is folded in so that permuted component lists yield
// distinct seeds, and appending a component never reproduces a shorter
// derivation.
std::uint64_t derive_seed(std::uint64_t master, std::span<const std::uint64_t> components);
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> components);

// xoshiro256++ with SplitMix64 state expansion.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on [0, bound), bound >= 1, unbiased (rejection).
  std::uint64_t uniform_int(std::uint64_t bound);
  // Standard normal via Box-Muller (no cached spare).
  double normal();
  double normal(double mean, double sd);
  bool bernoulli(double p);
  // Poisson via Knuth's product-of-uniforms; intended for small lambda.
  int poisson(double lambda);
  // Index sampled according to `probs` (need not be normalized).
  std::size_t categorical(std::span<const double> probs);
  // Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& items);
  // First k entries of a random permutation of {0, ..., n-1}.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_[4];
};

}  // namespace hte::rng
