#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace quadmppi {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block of
/// four 32-bit outputs is a pure function of (counter, key), so any rollout
/// can draw its noise without touching shared state.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter generate(Counter ctr, Key key, int rounds = 10) {
    for (int r = 0; r < rounds; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// Uniform in the open interval (0, 1).
inline double uniform_open01(std::uint32_t bits) {
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-32;
}

/// Four independent standard normals for one (stream, index) pair.
/// Stream identity is (seed, iteration, rollout); index is the time step.
inline std::array<double, 4> standard_normal4(std::uint64_t seed, std::uint64_t iteration,
                                              std::uint32_t rollout, std::uint32_t index) {
  const Philox4x32::Counter ctr{rollout, index, static_cast<std::uint32_t>(iteration),
                                static_cast<std::uint32_t>(iteration >> 32)};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto bits = Philox4x32::generate(ctr, key);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double r0 = std::sqrt(-2.0 * std::log(uniform_open01(bits[0])));
  const double a0 = two_pi * uniform_open01(bits[1]);
  const double r1 = std::sqrt(-2.0 * std::log(uniform_open01(bits[2])));
  const double a1 = two_pi * uniform_open01(bits[3]);
  return {r0 * std::cos(a0), r0 * std::sin(a0), r1 * std::cos(a1), r1 * std::sin(a1)};
}

}  // namespace quadmppi
