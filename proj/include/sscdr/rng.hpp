#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace sscdr::rng {

//! Finalizer of the splitmix64 generator (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

//! Derive a child stream seed from a parent seed and a path of indices.
//! The split is pure hashing, so any (seed, path) pair names the same
//! stream on every platform. Used everywhere randomness is fanned out
//! (per-column, per-row, per-restart, per-replicate seeds).
inline constexpr std::uint64_t derive(std::uint64_t seed,
                                      std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed + kGamma);
  for (std::uint64_t v : path) h = mix64(h ^ mix64(v + kGamma));
  return h;
}

//! Counter-based splitmix64 stream: output i is mix64(seed + (i+1)·gamma).
//! State is a single 64-bit counter; same seed reproduces the same stream
//! bit-exactly. Gaussians come from Box-Muller on top of the uniform
//! stream (bit-stable for a fixed libm).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  //! Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  //! Unbiased uniform integer in [0, n); modulo rejection.
  std::uint64_t next_below(std::uint64_t n) {
    for (;;) {
      std::uint64_t x = next_u64();
      std::uint64_t r = x % n;
      if (x - r <= std::uint64_t(0) - n) return r;
    }
  }

  //! Standard normal via Box-Muller; the pair's second value is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    double u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  //! Random sign, +1 or -1.
  double next_sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sscdr::rng
