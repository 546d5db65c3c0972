#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace szo {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

}  // namespace detail

/// Counter-based random stream keyed by (seed, stream_id). Draw number c of a
/// stream is a pure function of (seed, stream_id, c); each draw consumes
/// exactly one 128-bit block, so there is no rejection-dependent state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Independent child stream, e.g. the k-th perturbation of a run.
  RngStream substream(std::uint64_t k) const noexcept {
    return RngStream(seed_, detail::splitmix64(stream_id_ ^ detail::splitmix64(k + 0x5A0ull)), 0);
  }

  std::array<std::uint32_t, 4> next_block() noexcept {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    ++counter_;
    return detail::philox4x32_10(ctr, key);
  }

  std::uint64_t next_u64() noexcept {
    const auto b = next_block();
    return (std::uint64_t{b[1]} << 32) | b[0];
  }

  /// Uniform on (0, 1].
  double uniform() noexcept { return to_unit(next_u64()); }

  /// Uniform integer in [0, n) by 64x64 multiply-high.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller on the two 64-bit halves of one block.
  double normal() noexcept {
    const auto b = next_block();
    const double u1 = to_unit((std::uint64_t{b[1]} << 32) | b[0]);
    const double u2 = to_unit((std::uint64_t{b[3]} << 32) | b[2]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static double to_unit(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
};

/// Stream identifiers used by the optimizer and checks.
namespace streams {
inline constexpr std::uint64_t kPerturbation = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kPolicy = 3;
inline constexpr std::uint64_t kCheck = 4;
inline constexpr std::uint64_t kSynthetic = 5;
}  // namespace streams

/// Stateless hash-based normal/uniform draws for quantities that must be a
/// pure function of a key (e.g. per-sample offsets of synthetic functions).
inline double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  RngStream s(seed, detail::splitmix64(a * 0x9E3779B97F4A7C15ull ^ detail::splitmix64(b)), 0);
  return s.normal();
}

}  // namespace szo
