#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "utalfa/loops/og_cpg.hpp"
#include "utalfa/navfilter/doppler.hpp"
#include "utalfa/navfilter/mechanization.hpp"

namespace utalfa::navfilter {

inline constexpr int kErrStates = 17;
using ErrVec = Eigen::Matrix<double, kErrStates, 1>;
using ErrMat = Eigen::Matrix<double, kErrStates, kErrStates>;

/// Error-state indices. Attitude error psi is resolved in ECEF:
/// C_true = exp([psi x]) C_nominal.
enum ErrIdx : int { kP = 0, kV = 3, kPsi = 6, kBa = 9, kBg = 12, kClkB = 15, kClkD = 16 };

struct EkfErrorState {
  ErrVec x = ErrVec::Zero();
  ErrMat P = ErrMat::Identity();
};

struct EkfNoise {
  double accel_psd = 2.5e-3;      // velocity random walk, m^2/s^3
  double gyro_psd = 1e-8;         // angle random walk, rad^2/s
  double accel_bias_psd = 1e-8;   // m^2/s^5
  double gyro_bias_psd = 1e-12;   // rad^2/s^3
  double clock_bias_psd = 0.01;   // m^2/s
  double clock_drift_psd = 0.01;  // m^2/s^3
};

/// Continuous error dynamics linearized about the nominal state.
inline ErrMat ekf_dynamics(const NavState& nav, const scenario::ImuSample& imu, const scenario::EarthModel& earth) {
  ErrMat F = ErrMat::Zero();
  const Mat3 C = nav.q.toRotationMatrix();
  const Vec3 f_e = C * (imu.f_b - nav.b_a);
  const Mat3 W = scenario::skew(earth.rate());
  F.block<3, 3>(kP, kV) = Mat3::Identity();
  F.block<3, 3>(kV, kP) = scenario::gravity_gradient(nav.p, earth);
  F.block<3, 3>(kV, kV) = -2.0 * W;
  F.block<3, 3>(kV, kPsi) = -scenario::skew(f_e);
  F.block<3, 3>(kV, kBa) = -C;
  F.block<3, 3>(kPsi, kPsi) = -W;
  F.block<3, 3>(kPsi, kBg) = -C;
  F(kClkB, kClkD) = 1.0;
  return F;
}

/// Discrete process noise for one step. The clock block is the exact
/// two-state integrated random walk.
inline ErrMat ekf_process_noise(const NavState& nav, const EkfNoise& n, double dt) {
  ErrMat Q = ErrMat::Zero();
  const Mat3 C = nav.q.toRotationMatrix();
  Q.block<3, 3>(kV, kV) = n.accel_psd * dt * Mat3::Identity();
  Q.block<3, 3>(kPsi, kPsi) = n.gyro_psd * dt * (C * C.transpose());
  Q.block<3, 3>(kBa, kBa) = n.accel_bias_psd * dt * Mat3::Identity();
  Q.block<3, 3>(kBg, kBg) = n.gyro_bias_psd * dt * Mat3::Identity();
  Q(kClkB, kClkB) = n.clock_bias_psd * dt + n.clock_drift_psd * dt * dt * dt / 3.0;
  Q(kClkB, kClkD) = Q(kClkD, kClkB) = n.clock_drift_psd * dt * dt / 2.0;
  Q(kClkD, kClkD) = n.clock_drift_psd * dt;
  return Q;
}

inline EkfErrorState ekf_propagate(EkfErrorState err, const NavState& nav, const scenario::ImuSample& imu, double dt,
                                   const EkfNoise& noise, const scenario::EarthModel& earth = {}) {
  const ErrMat Phi = ErrMat::Identity() + ekf_dynamics(nav, imu, earth) * dt;
  err.x = Phi * err.x;
  err.P = Phi * err.P * Phi.transpose() + ekf_process_noise(nav, noise, dt);
  err.P = 0.5 * (err.P + err.P.transpose());
  return err;
}

/// Folds the error estimate into the nominal state.
inline NavState ekf_inject(NavState nav, const ErrVec& x) {
  nav.p += x.segment<3>(kP);
  nav.v += x.segment<3>(kV);
  nav.q = (scenario::rotation_vector_to_quat(x.segment<3>(kPsi)) * nav.q).normalized();
  nav.b_a += x.segment<3>(kBa);
  nav.b_g += x.segment<3>(kBg);
  nav.clk_b += x(kClkB);
  nav.clk_d += x(kClkD);
  return nav;
}

/// One channel's observation with the satellite state at its epoch and the
/// measurement standard deviations.
struct EkfMeasurement {
  loops::ChannelObservation obs;
  scenario::SatPva sat;
  double sigma_rho = 1.0;  // m
  double sigma_fd = 1.0;   // Hz
};

struct EkfUpdateResult {
  EkfErrorState err;
  NavState nav;
  int accepted = 0;
  int rejected = 0;
  bool skipped = false;
};

namespace detail {

inline bool scalar_update(EkfErrorState& e, const ErrVec& h, double innovation, double r, double gate) {
  const double s = h.dot(e.P * h) + r;
  if (!(s > 0) || innovation * innovation > gate * gate * s) return false;
  const ErrVec k = e.P * h / s;
  e.x += k * (innovation - h.dot(e.x));
  const ErrMat IK = ErrMat::Identity() - k * h.transpose();
  e.P = IK * e.P * IK.transpose() + r * k * k.transpose();
  e.P = 0.5 * (e.P + e.P.transpose());
  return true;
}

}  // namespace detail

/// Sequential scalar updates (pseudorange then Doppler per channel) with
/// innovation gating, followed by injection and reset of the error state.
/// Predictions are evaluated on the nominal state, so innovations are taken
/// relative to the current error estimate.
inline EkfUpdateResult ekf_update(EkfErrorState err, NavState nav, const std::vector<EkfMeasurement>& meas,
                                  double gate_sigma = 5.0) {
  EkfUpdateResult out;
  for (const auto& m : meas) {
    const Vec3 d = m.sat.p - nav.p;
    const double range = d.norm();
    const Vec3 e = d / range;
    const Vec3 w = m.sat.v - nav.v;

    ErrVec h = ErrVec::Zero();
    h.segment<3>(kP) = -e;
    h(kClkB) = 1.0;
    const double rho_pred = pseudorange(nav.p, nav.clk_b, m.sat);
    if (detail::scalar_update(err, h, m.obs.rho_tilde - rho_pred, m.sigma_rho * m.sigma_rho, gate_sigma)) {
      ++out.accepted;
    } else {
      ++out.rejected;
    }

    ErrVec g = ErrVec::Zero();
    g.segment<3>(kP) = kHzPerMps * (w - e * e.dot(w)) / range;
    g.segment<3>(kV) = kHzPerMps * e;
    g(kClkD) = -kHzPerMps;
    const double fd_pred = doppler_predict({nav.p, nav.v, Vec3::Zero(), nav.clk_d, 0.0}, m.sat);
    if (detail::scalar_update(err, g, m.obs.fd_tilde - fd_pred, m.sigma_fd * m.sigma_fd, gate_sigma)) {
      ++out.accepted;
    } else {
      ++out.rejected;
    }
  }
  out.skipped = out.accepted == 0;
  out.nav = ekf_inject(nav, err.x);
  err.x.setZero();
  out.err = err;
  return out;
}

/// Feedback sets for every satellite; entries for unlocked channels are left
/// invalid.
inline std::vector<loops::ChannelFeedback> make_feedback(const NavState& nav, const std::vector<scenario::SatPva>& sats,
                                                         const std::vector<bool>& locked, const Vec3& a_u) {
  std::vector<loops::ChannelFeedback> fb(sats.size());
  const ReceiverKinematics rx{nav.p, nav.v, a_u, nav.clk_d, 0.0};
  for (std::size_t i = 0; i < sats.size(); ++i) {
    if (!locked[i]) continue;
    fb[i].rho = pseudorange(nav.p, nav.clk_b, sats[i]);
    fb[i].rho_dot = pseudorange_rate(rx, sats[i]);
    fb[i].fd_dot = doppler_rate(rx, sats[i]);
    fb[i].t = nav.t;
    fb[i].valid = true;
  }
  return fb;
}

enum class Mode { STL, VTL };

/// STL -> VTL once enough satellites have valid ephemeris and the filter has
/// converged; VTL -> STL only after the count stays short for `hold` seconds.
class ModeSwitch {
 public:
  explicit ModeSwitch(double trace_threshold = 1e3, int min_sats = 4, double hold = 1.0)
      : threshold_(trace_threshold), min_sats_(min_sats), hold_(hold) {}

  Mode update(int valid_tracked, double cov_trace, double t) {
    if (mode_ == Mode::STL) {
      if (valid_tracked >= min_sats_ && cov_trace < threshold_) {
        mode_ = Mode::VTL;
        if (!switch_time_) switch_time_ = t;  // first switch only
        short_since_.reset();
      }
    } else if (valid_tracked < min_sats_) {
      if (!short_since_) short_since_ = t;
      if (t - *short_since_ > hold_) {
        mode_ = Mode::STL;
        short_since_.reset();
      }
    } else {
      short_since_.reset();
    }
    return mode_;
  }

  Mode mode() const { return mode_; }
  std::optional<double> switch_time() const { return switch_time_; }

 private:
  double threshold_;
  int min_sats_;
  double hold_;
  Mode mode_ = Mode::STL;
  std::optional<double> short_since_;
  std::optional<double> switch_time_;
};

/// Free-function form of one ModeSwitch step.
inline Mode mode_switch(ModeSwitch& sw, int valid_tracked, double cov_trace, double t) {
  return sw.update(valid_tracked, cov_trace, t);
}

}  // namespace utalfa::navfilter
