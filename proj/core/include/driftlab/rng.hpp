#pragma once

#include <cstdint>
#include <string_view>

namespace driftlab {

/// Splittable counter-based pseudorandom generator built on the SplitMix64
/// finalizer. Identical seed and draw sequence gives identical output on any
/// platform (pure 64-bit integer arithmetic, IEEE-754 doubles).
///
/// Child streams are derived by mixing the parent seed with a label hash, so
/// `root.child("aug").child(step)` names a stream independent of every other
/// labelled stream. All randomness in the system descends from one root seed
/// through named splits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Derive an independent child stream from a string label.
  Rng child(std::string_view label) const;
  /// Derive an independent child stream from an integer label (step index).
  Rng child(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller. Each transform yields a pair; the
  /// second normal is cached, so two uniforms feed two gaussian() calls.
  double gaussian();
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// FNV-1a 64-bit hash, used for label splitting and config hashing.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace driftlab
