#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace utalfa::signal {

using PrnCode = std::array<std::int8_t, 1023>;

namespace detail {

// G2 output delay (chips) for PRN 1..32.
inline constexpr std::array<int, 32> kG2Delay = {
    5,   6,   7,   8,   17,  18,  139, 140, 141, 251, 252, 254, 255, 256, 257, 258,
    469, 470, 471, 472, 473, 474, 509, 512, 513, 514, 515, 516, 859, 860, 861, 862};

inline PrnCode generate(int prn) {
  std::array<std::uint8_t, 1023> g1{}, g2{};
  std::uint16_t r1 = 0x3FF, r2 = 0x3FF;  // bit 0 = stage 1
  for (int i = 0; i < 1023; ++i) {
    g1[i] = (r1 >> 9) & 1;
    g2[i] = (r2 >> 9) & 1;
    // G1 = 1 + x^3 + x^10, G2 = 1 + x^2 + x^3 + x^6 + x^8 + x^9 + x^10
    const std::uint16_t f1 = ((r1 >> 2) ^ (r1 >> 9)) & 1;
    const std::uint16_t f2 = ((r2 >> 1) ^ (r2 >> 2) ^ (r2 >> 5) ^ (r2 >> 7) ^ (r2 >> 8) ^ (r2 >> 9)) & 1;
    r1 = static_cast<std::uint16_t>(((r1 << 1) | f1) & 0x3FF);
    r2 = static_cast<std::uint16_t>(((r2 << 1) | f2) & 0x3FF);
  }
  const int delay = kG2Delay[prn - 1];
  PrnCode code{};
  for (int i = 0; i < 1023; ++i) {
    const std::uint8_t bit = g1[i] ^ g2[(i - delay + 1023) % 1023];
    code[i] = bit ? -1 : 1;  // logic 1 -> -1
  }
  return code;
}

inline std::array<PrnCode, 32> build_table() {
  std::array<PrnCode, 32> t{};
  for (int p = 1; p <= 32; ++p) t[p - 1] = generate(p);
  return t;
}

}  // namespace detail

/// C/A Gold code for `prn` as +/-1 chips (logic 0 -> +1).
inline const PrnCode& prn_code(int prn) {
  if (prn < 1 || prn > 32) throw std::out_of_range("prn_code: PRN must be in 1..32");
  static const std::array<PrnCode, 32> table = detail::build_table();
  return table[prn - 1];
}

}  // namespace utalfa::signal
