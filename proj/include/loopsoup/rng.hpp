#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace loopsoup {

inline constexpr std::string_view kGeneratorId = "philox4x32-10";

/// Counter-based Philox4x32-10 engine (Salmon et al., Random123).
///
/// The 64-bit seed is the key; the 64-bit stream id occupies the upper half of
/// the counter, so distinct (seed, stream) pairs give non-overlapping
/// sequences. Satisfies UniformRandomBitGenerator with 32-bit output.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 4) {
      refill();
    }
    return out_[pos_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1].
  double uniform_open0() noexcept { return 1.0 - uniform01(); }

  /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
  std::uint64_t bounded(std::uint64_t bound) noexcept {
    if (bound <= 0xFFFFFFFFull) {
      const auto b = static_cast<std::uint32_t>(bound);
      std::uint64_t m = std::uint64_t{(*this)()} * b;
      auto low = static_cast<std::uint32_t>(m);
      if (low < b) {
        const std::uint32_t threshold = static_cast<std::uint32_t>(-b) % b;
        while (low < threshold) {
          m = std::uint64_t{(*this)()} * b;
          low = static_cast<std::uint32_t>(m);
        }
      }
      return m >> 32;
    }
    // Wide bounds are never needed for vertex ids; plain rejection suffices.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = (std::uint64_t{(*this)()} << 32) | (*this)();
    } while (x >= limit);
    return x % bound;
  }

  std::uint64_t seed() const noexcept {
    return (std::uint64_t{key_[1]} << 32) | key_[0];
  }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  void refill() noexcept {
    const std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    out_ = block(ctr, key_);
    ++counter_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> out_{};
  int pos_ = 4;
};

using Rng = Philox4x32;

/// Stream id for replica `replica` of grid cell `cell`. Keeps replica streams of
/// different grid points disjoint under one seed.
constexpr std::uint64_t replica_stream(std::uint64_t cell, std::uint64_t replica) noexcept {
  return (cell << 40) ^ replica;
}

/// Exponential(rate) variate.
inline double sample_exponential(Rng& rng, double rate) {
  return -std::log(rng.uniform_open0()) / rate;
}

}  // namespace loopsoup
