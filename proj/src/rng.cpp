#include "nglab/rng.hpp"

#include <cmath>
#include <numbers>

namespace nglab {

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

Vec Rng::normal_vec(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Rng Rng::substream(std::uint64_t master, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(master ^ 0x5851F42D4C957F2DULL) + index * 0xD1B54A32D192ED03ULL));
}

}  // namespace nglab
