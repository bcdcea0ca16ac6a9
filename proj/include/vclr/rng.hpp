#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace vclr {

/// Combines integers into a well-mixed 64-bit seed (splitmix64 finaliser chain).
/// Used to derive independent per-item streams from a master seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Seeded random stream. Distribution code is written out here instead of
/// using <random> distributions so sequences do not depend on the standard
/// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

  /// Textual engine state, restorable with `restore`.
  std::string state() const;
  void restore(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vclr
