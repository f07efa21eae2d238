#pragma once

// Counter-based random streams. Every stream is keyed by a 64-bit value derived
// from (seed, labels...), and draw k of a stream is a pure function of (key, k),
// so independent streams never perturb each other and replays are exact.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace excasim {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, folded through splitmix64 so short labels spread over all bits.
inline constexpr std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Stream for (seed, label_0, label_1, ...).
  template <typename... Labels>
  static CounterRng derive(std::uint64_t seed, const Labels&... labels) {
    std::uint64_t key = splitmix64(seed);
    ((key = splitmix64(key ^ hash_label(std::string_view(labels)))), ...);
    return CounterRng(key);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ ^ splitmix64(counter_++)); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace excasim
