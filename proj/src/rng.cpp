#include "dnsd/rng.hpp"

#include <cmath>
#include <numbers>

namespace dnsd {

double SplitMix64::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SplitMix64::below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % n;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  SplitMix64 a(seed ^ (tag * 0xD1B54A32D192ED03ULL));
  a.next_u64();
  return a.next_u64();
}

}  // namespace dnsd
