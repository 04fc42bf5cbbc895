#pragma once

#include <cstdint>

namespace bellsim {

// SplitMix64 stream. Every trial gets its own stream derived from
// (master seed, stream id, trial index), so the draws of a trial never depend
// on which thread ran it or in what order.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t state) noexcept : state_(state) {}

  static constexpr Rng split(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index) noexcept {
    std::uint64_t h = mix(seed ^ 0x6a09e667f3bcc909ULL);
    h = mix(h ^ (stream + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ (index + 0xbb67ae8584caa73bULL));
    return Rng(h);
  }

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; the bias is < n / 2^64 and irrelevant here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace bellsim
