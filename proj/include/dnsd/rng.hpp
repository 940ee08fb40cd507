#pragma once

#include <cstddef>
#include <cstdint>

namespace dnsd {

/// SplitMix64 stream. The state is a single 64-bit counter advanced by the golden
/// gamma 0x9E3779B97F4A7C15; outputs use the standard finalizer. Every derived
/// quantity (uniforms, Gaussians, indices) is defined below in terms of next_u64()
/// so any implementation can reproduce the exact same stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box–Muller; consumes two draws, uses the cosine branch only.
  double normal() noexcept;

  /// Uniform integer in [0, n) by rejection on the 64-bit range (no modulo bias).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Mixes a seed with a stream tag so independent purposes get unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace dnsd
