#pragma once

#include "nglab/types.hpp"

#include <cstdint>

namespace nglab {

/// Counter-based SplitMix64 stream. Draw k is a pure function of
/// (seed, k), so streams are identical on every platform and compiler:
///
///   z = seed + (k + 1) * 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   u = z ^ (z >> 31)
///
/// Uniforms use the top 53 bits; normals use Box-Muller on two uniforms
/// (both outputs are used, the second is cached).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double normal();
  Vec normal_vec(int n);

  /// Independent stream for sub-task `index` (seed, chunk, path, ...).
  [[nodiscard]] static Rng substream(std::uint64_t master, std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace nglab
