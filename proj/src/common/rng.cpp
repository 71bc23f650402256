#include "hte/common/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hte::rng {

std::uint64_t derive_seed(std::uint64_t master, std::span<const std::uint64_t> components) {
  std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ull);
  std::uint64_t position = 1;
  for (std::uint64_t c : components) {
    h = mix64(h ^ mix64(c + 0x9e3779b97f4a7c15ull * position));
    ++position;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> components) {
  return derive_seed(master, std::span<const std::uint64_t>(components.begin(), components.size()));
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  // SplitMix64 state expansion; guarantees a nonzero xoshiro state.
  std::uint64_t sm = seed;
  for (auto& word : state_) {
    sm += 0x9e3779b97f4a7c15ull;
    word = mix64(sm);
  }
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_int: bound must be >= 1");
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double Rng::normal() {
  // Box-Muller; u1 shifted away from zero so log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

bool Rng::bernoulli(double p) { return uniform() < p; }

int Rng::poisson(double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
  const double limit = std::exp(-lambda);
  int k = 0;
  double product = 1.0;
  for (;;) {
    product *= uniform();
    if (product <= limit) return k;
    ++k;
  }
}

std::size_t Rng::categorical(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = uniform() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return probs.empty() ? 0 : probs.size() - 1;
}

void Rng::shuffle(std::vector<std::size_t>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_int(i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  // Partial Fisher-Yates: first k slots are the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_int(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace hte::rng
