#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace transloop {

// SplitMix64. Tiny state, no platform-dependent distributions, so a seeded
// run reproduces bit-for-bit regardless of standard library or thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Sample an index from softmax(logits) by inverse CDF.
  std::size_t categorical_from_logits(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("categorical_from_logits: empty");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double total = 0.0;
    std::vector<double> w(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      w[i] = std::exp(logits[i] - mx);
      total += w[i];
    }
    double u = next_double() * total;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      u -= w[i];
      if (u < 0.0) return i;
    }
    return logits.size() - 1;
  }

 private:
  std::uint64_t state_;
};

// Fold an arbitrary list of identifiers (run seed, iteration, phase, ids...)
// into one stream seed. Per-task streams keep sampling independent of
// scheduling order.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = 0x51ed270b0a1cee4fULL;
  for (std::uint64_t p : parts) {
    s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    s ^= s >> 31;
  }
  return s;
}

}  // namespace transloop
