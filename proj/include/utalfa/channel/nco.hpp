#pragma once

#include <cmath>
#include <cstdint>

#include "utalfa/constants.hpp"
#include "utalfa/loops/control.hpp"

namespace utalfa::channel {

/// Replica code/carrier generator state. Code phase is kept as a fraction of
/// the code period plus a signed period count; carrier phase as a fraction of
/// a cycle plus a signed cycle count.
struct ChannelNcoState {
  double tau_nco = 0;            // chips, [0, 1023)
  std::int64_t code_periods = 0;
  double f_code = kChipRate;     // chips/s
  double phi_nco = 0;            // cycles, [0, 1)
  std::int64_t carrier_cycles = 0;
  double f_carr = 0;             // Hz
  double t_rx = 0;               // s

  /// Unwrapped replica code phase in chips.
  double total_chips() const { return static_cast<double>(code_periods) * kCodeLength + tau_nco; }
  /// Unwrapped replica carrier phase in cycles.
  double total_cycles() const { return static_cast<double>(carrier_cycles) + phi_nco; }
  /// Transmit time implied by the replica code phase.
  double transmit_time() const { return total_chips() / kChipRate; }

  void set_code_phase(double chips) {
    const double periods = std::floor(chips / kCodeLength);
    code_periods = static_cast<std::int64_t>(periods);
    tau_nco = chips - periods * kCodeLength;
    normalize();
  }

  void set_carrier_phase(double cycles) {
    const double whole = std::floor(cycles);
    carrier_cycles = static_cast<std::int64_t>(whole);
    phi_nco = cycles - whole;
  }

  void normalize() {
    if (tau_nco >= kCodeLength || tau_nco < 0) {
      const double k = std::floor(tau_nco / kCodeLength);
      tau_nco -= k * kCodeLength;
      code_periods += static_cast<std::int64_t>(k);
      if (tau_nco >= kCodeLength) {
        tau_nco -= kCodeLength;
        ++code_periods;
      }
    }
    if (phi_nco >= 1.0 || phi_nco < 0) {
      const double k = std::floor(phi_nco);
      phi_nco -= k;
      carrier_cycles += static_cast<std::int64_t>(k);
    }
  }
};

/// Applies the control vector and integrates both phases over dt.
inline ChannelNcoState nco_advance(ChannelNcoState s, const loops::ControlParams& theta, double dt) {
  s.f_code = kChipRate + theta.f_dll;
  s.f_carr = theta.f_pll;
  s.tau_nco += s.f_code * dt;
  s.phi_nco += s.f_carr * dt;
  s.t_rx += dt;
  s.normalize();
  return s;
}

}  // namespace utalfa::channel
