#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "utalfa/channel/discriminators.hpp"
#include "utalfa/constants.hpp"
#include "utalfa/loops/control.hpp"

namespace utalfa::loops {

struct LoopGains {
  double K1 = 0;  // 1/s, DLL
  double K2 = 0;  // Hz/s per cycle
  double K3 = 0;  // Hz per cycle
  double SF = kCodeCarrierRatio;
};

/// Second-order PLL (noise bandwidth B = 0.53 * omega_n at zeta = 0.707) and
/// first-order DLL (B = K1 / 4).
inline LoopGains gains_from_bandwidth(double b_pll, double b_dll, double T) {
  if (!(T > 0) || !(b_pll > 0) || !(b_dll > 0)) throw std::invalid_argument("gains: bandwidths and T must be positive");
  if (!(b_pll * T < 0.1) || !(b_dll * T < 0.1)) throw std::invalid_argument("gains: B*T must be below 0.1");
  const double wn = b_pll / 0.53;
  return {4.0 * b_dll, wn * wn, 1.414 * wn, kCodeCarrierRatio};
}

/// The loop filter of one channel. `acc` is the Doppler integrator behind the
/// unit delay; outputs always tap the value before this epoch's increment.
struct AlfaFilterState {
  double acc = 0;  // Hz
  LoopGains gains;
  double T = 1e-3;  // s
};

inline std::pair<ControlParams, AlfaFilterState> stl_update(AlfaFilterState s, const channel::DiscriminatorOutputs& d,
                                                            double K_f) {
  const double dtau = d.valid_tau ? d.d_tau : 0.0;
  const double dphi = d.valid_phi ? d.d_phi : 0.0;
  const double dfd = d.valid_fd ? d.d_fd : 0.0;
  ControlParams u{s.gains.K1 * dtau + s.gains.SF * s.acc, s.acc + s.gains.K3 * dphi};
  s.acc += s.T * (s.gains.K2 * dphi + K_f * dfd);
  return {u, s};
}

struct AlfaStep {
  ControlParams theta;
  AlfaFilterState state;
  bool stale = false;  // assist older than the bound, replaced by zero
};

/// Same topology as stl_update with the FLL assist replaced by the fed-back
/// Doppler rate. `age` is the time since the nav epoch that produced fd_dot.
inline AlfaStep alfa_update(AlfaFilterState s, double d_tau, double d_phi, double fd_dot, double age = 0.0,
                            double staleness_bound = 0.5) {
  AlfaStep out;
  if (!(age <= staleness_bound) || !std::isfinite(fd_dot)) {
    fd_dot = 0;
    out.stale = true;
  }
  out.theta = {s.gains.K1 * d_tau + s.gains.SF * s.acc, s.acc + s.gains.K3 * d_phi};
  s.acc += s.T * (s.gains.K2 * d_phi + fd_dot);
  out.state = s;
  return out;
}

}  // namespace utalfa::loops
