#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gwae {

// Counter-based splittable random stream. A stream is (key, counter); draw n of
// a stream with key K is scramble(K + (n+1)*GOLDEN), so streams can be derived
// and replayed independently of each other on any platform (pure uint64 math,
// no libc distributions).
//
// Test vectors (frozen, see test_rng.cpp):
//   RngStream(42).next_u64()             == 0xbdd732262feb6e95
//   RngStream(42).derive("x").next_u64() == 0x90750f1bc79fa07f
//   RngStream(42).derive(7).next_u64()   == 0x76263192db52894a
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : key_(seed) {}

  /// Independent child stream named by a label.
  RngStream derive(std::string_view label) const {
    return RngStream(scramble(key_ ^ fnv1a64(label)));
  }

  /// Independent child stream indexed by an integer (per-item streams).
  RngStream derive(std::uint64_t index) const {
    return RngStream(scramble(key_ ^ (0xd6e8feb86659fd93ULL * (index + 1))));
  }

  std::uint64_t next_u64() {
    return scramble(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Stream key; RngStream(key()) replays a fresh copy of this stream.
  std::uint64_t key() const { return key_; }

  /// Standard normal via Box-Muller (pair cached; no rejection, so the draw
  /// count is deterministic).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

private:
  static std::uint64_t scramble(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gwae
