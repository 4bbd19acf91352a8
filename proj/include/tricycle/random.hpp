#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace tricycle {

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distribution transforms are implemented here rather than
/// taken from <random> because the standard distributions are allowed to
/// differ between library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for item `index` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal (Box-Muller, one draw per call, no cached spare).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  /// Textual engine state; round-trips through set_state exactly.
  std::string state() const;
  void set_state(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace tricycle
