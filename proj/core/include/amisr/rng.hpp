#pragma once

#include <cstdint>
#include <random>

namespace amisr {

// Seeded value stream. Identical seeds give bit-identical streams on every
// platform: the engine is mt19937_64 and the floating-point mappings below are
// written out rather than delegated to <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  // Independent child stream keyed by `key`; does not advance this stream.
  Rng split(uint64_t key) const;

  // Mixing function used for stream splitting and per-item seeds.
  static uint64_t mix(uint64_t x);

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace amisr
