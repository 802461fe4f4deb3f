#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace fbsde {

// std::mt19937_64 output is fully specified by the standard; the uniform and
// normal transforms are spelled out here because the std distributions are
// implementation-defined and bundles must regenerate bit-identically.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Splitting rule: substream k of `seed` is seeded with
  // splitmix64(seed XOR 0x9E3779B97F4A7C15 * (k + 1)).
  static RandomStream substream(std::uint64_t seed, std::uint64_t k) {
    return RandomStream(splitmix64(seed ^ (0x9E3779B97F4A7C15ull * (k + 1))));
  }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_open01() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform draw from the closed Euclidean ball of given radius.
  void ball_point(double radius, std::span<double> out) {
    double norm2 = 0.0;
    for (double& c : out) {
      c = normal();
      norm2 += c * c;
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
      for (double& c : out) c = 0.0;
      return;
    }
    const double k = static_cast<double>(out.size());
    const double scale = radius * std::pow(uniform01(), 1.0 / k) / norm;
    for (double& c : out) c *= scale;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fbsde
