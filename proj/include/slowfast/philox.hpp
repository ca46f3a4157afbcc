#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace slowfast {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(Key key) : key_(key) {}
  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  /// Standard normal from one block: two 53-bit uniforms on (0, 1], Box-Muller
  /// cosine branch.
  double normal(Counter ctr) const {
    const Counter x = (*this)(ctr);
    const double u1 = to_unit(x[0], x[1]);
    const double u2 = to_unit(x[2], x[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  Key key_;
};

}  // namespace slowfast
