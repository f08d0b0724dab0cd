#pragma once

// Counter-based random streams (Philox4x32-10). Every draw is a pure function of
// (seed, counter), so sampling is order independent and parallel replay is exact.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "nfield/core.hpp"

namespace nfield {

using Counter = std::array<std::uint32_t, 4>;

inline Counter philox4x32_10(Counter ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Stream families; the tag occupies the top byte of counter word 2.
enum class StreamTag : std::uint32_t {
  Brownian = 1,
  Initial = 2,
  Graph = 3,
  Probe = 4,
  Generic = 5,
};

/// Maps two 32-bit words to a double in the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter block(const Counter& ctr) const { return philox4x32_10(ctr, key_); }

  std::array<double, 2> uniforms(const Counter& ctr) const {
    const Counter r = block(ctr);
    return {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normals(const Counter& ctr) const {
    const auto u = uniforms(ctr);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double a = 2.0 * kPi * u[1];
    return {r * std::cos(a), r * std::sin(a)};
  }

  static Counter make(StreamTag tag, std::uint32_t a, std::uint64_t b, std::uint32_t block = 0) {
    return {a, static_cast<std::uint32_t>(b),
            (static_cast<std::uint32_t>(tag) << 24) | static_cast<std::uint32_t>((b >> 32) & 0xFFFFFFu), block};
  }

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Sequential engine over a single stream; satisfies UniformRandomBitGenerator.
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;

  explicit PhiloxEngine(std::uint64_t seed, std::uint32_t stream = 0) : rng_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = rng_.block(CounterRng::make(StreamTag::Generic, stream_, next_++));
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  double uniform() {
    const auto hi = (*this)();
    const auto lo = (*this)();
    return to_open_unit(hi, lo);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  CounterRng rng_;
  std::uint32_t stream_;
  std::uint64_t next_ = 0;
  Counter buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nfield
