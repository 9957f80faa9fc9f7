#pragma once

#include <cmath>
#include <optional>

#include "utalfa/channel/nco.hpp"
#include "utalfa/constants.hpp"
#include "utalfa/loops/control.hpp"

namespace utalfa::loops {

struct ChannelObservation {
  double rho_tilde = 0;  // m
  double fd_tilde = 0;   // Hz
  double t_rx = 0;       // s
  int prn = 0;

  static constexpr double kMinRange = 1.5e7;
  static constexpr double kMaxRange = 3.5e7;
  bool plausible() const {
    return std::isfinite(rho_tilde) && std::isfinite(fd_tilde) && rho_tilde >= kMinRange && rho_tilde <= kMaxRange;
  }
};

/// Navigation-filter output for one channel, stamped with its nav epoch.
struct ChannelFeedback {
  double rho = 0;      // m
  double rho_dot = 0;  // m/s
  double fd_dot = 0;   // Hz/s
  double t = 0;        // s
  bool valid = false;
};

/// Pseudorange from the replica transmit time (optionally refined by the
/// code-delay estimate, chips) and Doppler from the loop estimate.
inline std::optional<ChannelObservation> og_generate(double fd_estimate, const channel::ChannelNcoState& nco, int prn,
                                                     bool locked, double d_tau_hat = 0.0) {
  if (!locked) return std::nullopt;
  const double transmit_time = (nco.total_chips() + d_tau_hat) / kChipRate;
  ChannelObservation o;
  o.rho_tilde = kSpeedOfLight * (nco.t_rx - transmit_time);
  o.fd_tilde = fd_estimate;
  o.t_rx = nco.t_rx;
  o.prn = prn;
  return o;
}

struct CpgParams {
  double K_cpg = 0.1;           // per epoch
  double T = 1e-3;              // s
  double staleness_bound = 0.5; // s
};

struct CpgStep {
  ControlParams theta;
  bool stale = false;
};

/// Carrier command from the predicted range rate, extrapolated to the replica's
/// receive time with the fed-back Doppler rate; code command carrier-aided plus
/// a proportional pull of the replica code phase toward the code phase implied
/// by the predicted pseudorange at that time.
inline CpgStep cpg(const ChannelFeedback& fb, const channel::ChannelNcoState& nco, const CpgParams& p,
                   const ControlParams& previous) {
  const double age = nco.t_rx - fb.t;
  if (!fb.valid || !(age <= p.staleness_bound)) return {previous, true};
  CpgStep out;
  const double rho_ddot = -fb.fd_dot / kHzPerMps;
  out.theta.f_pll = -kHzPerMps * (fb.rho_dot + rho_ddot * age);
  const double rho_now = fb.rho + fb.rho_dot * age + 0.5 * rho_ddot * age * age;
  const double chips_pred = kChipRate * (nco.t_rx - rho_now / kSpeedOfLight);
  out.theta.f_dll = kCodeCarrierRatio * out.theta.f_pll + p.K_cpg * (chips_pred - nco.total_chips()) / p.T;
  return out;
}

}  // namespace utalfa::loops
