#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tct {

/// One step of the SplitMix64 output function.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream key from a root seed, a label and an index.
/// Every random draw in the project comes from a stream keyed this way, so a
/// single 64-bit seed reproduces a whole run.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

/// Seeded stream with platform-independent conversions (std::mt19937_64 is
/// fully specified; the <random> distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0)
      : engine_(derive_seed(root, label, index)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tct
