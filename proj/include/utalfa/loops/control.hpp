#pragma once

#include <cmath>

namespace utalfa::loops {

/// NCO commands: code-rate correction on top of f_chip, and carrier Doppler.
struct ControlParams {
  double f_dll = 0;  // chips/s
  double f_pll = 0;  // Hz

  static constexpr double kMaxCarrierHz = 50e3;

  bool sane() const {
    return std::isfinite(f_dll) && std::isfinite(f_pll) && std::abs(f_pll) < kMaxCarrierHz;
  }
};

}  // namespace utalfa::loops
