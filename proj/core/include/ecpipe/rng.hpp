#pragma once

#include <cstdint>
#include <string_view>

namespace ecpipe {

/// splitmix64 output function applied to a fixed state value.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic generator with a 64-bit state and the splitmix64 update.
/// Identical seed -> identical stream, on every platform.
struct Rng {
  std::uint64_t state = 0;

  explicit Rng(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next_u64() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double strictly inside (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  /// Uniform integer in [0, n). n must be > 0. Uses modulo reduction;
  /// bias is negligible for the ranges used here and keeps the stream
  /// reproducible by construction.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Named sub-stream derived from this generator's current state without
  /// advancing it. Stages fork their own streams so each is independently
  /// reproducible from the top-level seed.
  Rng child(std::string_view name) const {
    // FNV-1a over the name, folded into the parent state.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return Rng(splitmix64_mix(state ^ h));
  }
};

}  // namespace ecpipe
