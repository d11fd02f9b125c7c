#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace turb {

// Counter-style deterministic generator (splitmix64). Every random draw in
// the library flows through this class so that results are reproducible
// bit-for-bit across runs from a single seed. std::normal_distribution is
// implementation-defined, so the gaussian path is a pinned Box-Muller.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Derives a per-stage seed from a master seed and a stage name
  // (FNV-1a of the name mixed through one splitmix64 round).
  static std::uint64_t derive(std::uint64_t seed, std::string_view stage) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stage) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    Rng mix(seed ^ h);
    return mix.next_u64();
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace turb
