#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "utalfa/constants.hpp"
#include "utalfa/loops/control.hpp"

namespace utalfa::loops {

using Vec3k = Eigen::Vector3d;
using Mat3k = Eigen::Matrix3d;

/// Local estimator of [dtau chips, dphi cycles, dfd Hz]. dfd is referenced to
/// the carrier command in force during the next integration.
struct KfChannelState {
  Vec3k x = Vec3k::Zero();
  Mat3k P = Mat3k::Identity();
  Mat3k Q = Mat3k::Zero();
  Mat3k R = Mat3k::Identity();
};

struct MeasurementVariances {
  double tau = 0;  // chips^2
  double phi = 0;  // cycles^2
  double fd = 0;   // Hz^2
  bool clamped = false;
};

inline constexpr double kSigma2Tau0 = 62.5;
inline constexpr double kSigma2Phi0 = 7.124;
inline constexpr double kSigma2Fd0 = 4.45e5;

/// sigma^2 = sigma0^2 * 10^(-cn0/10). With `clamp` set the C/N0 is first
/// limited to [10, 60] dB-Hz and `clamped` reports whether that happened.
inline MeasurementVariances variance_from_cn0(double cn0, bool clamp = true) {
  MeasurementVariances v;
  if (clamp) {
    const double c = std::clamp(cn0, 10.0, 60.0);
    v.clamped = c != cn0;
    cn0 = c;
  }
  const double s = std::pow(10.0, -cn0 / 10.0);
  v.tau = kSigma2Tau0 * s;
  v.phi = kSigma2Phi0 * s;
  v.fd = kSigma2Fd0 * s;
  return v;
}

inline Mat3k kf_transition(double T, double alpha) {
  Mat3k F = Mat3k::Identity();
  F(0, 2) = alpha * T;
  F(1, 2) = T;
  return F;
}

inline Eigen::Matrix<double, 3, 2> kf_control_matrix(double T, double alpha) {
  Eigen::Matrix<double, 3, 2> G = Eigen::Matrix<double, 3, 2>::Zero();
  G(0, 0) = -T;
  G(0, 1) = alpha * T;
  return G;
}

inline KfChannelState kf_predict(KfChannelState s, const ControlParams& u, double T, double alpha) {
  const Mat3k F = kf_transition(T, alpha);
  s.x = F * s.x + kf_control_matrix(T, alpha) * Eigen::Vector2d(u.f_dll, u.f_pll);
  s.P = F * s.P * F.transpose() + s.Q;
  s.P = 0.5 * (s.P + s.P.transpose());
  return s;
}

struct KfCorrection {
  KfChannelState state;
  Vec3k innovation = Vec3k::Zero();
  Mat3k S = Mat3k::Identity();
  bool repaired = false;  // P needed symmetrization or eigenvalue clamping
};

/// Measurement update with H = I (Joseph form).
inline KfCorrection kf_correct(KfChannelState s, const Vec3k& z) {
  KfCorrection out;
  out.S = s.P + s.R;
  const Mat3k K = s.P * out.S.inverse();
  out.innovation = z - s.x;
  s.x += K * out.innovation;
  const Mat3k IK = Mat3k::Identity() - K;
  s.P = IK * s.P * IK.transpose() + K * s.R * K.transpose();
  s.P = 0.5 * (s.P + s.P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3k> es(s.P);
  if (es.eigenvalues().minCoeff() < 0) {
    const Vec3k ev = es.eigenvalues().cwiseMax(0.0);
    s.P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.repaired = true;
  }
  out.state = s;
  return out;
}

struct KfStep {
  KfChannelState state;
  ControlParams theta;
  Vec3k innovation = Vec3k::Zero();
  bool repaired = false;
};

/// One epoch: predict through the integration just completed under `u`,
/// correct with z, then derive the next carrier and code commands. The
/// Doppler state is re-referenced to the new carrier command afterwards.
inline KfStep kf_channel_update(const KfChannelState& state, const Vec3k& z, const ControlParams& u, double T,
                                double alpha, double sf = kCodeCarrierRatio) {
  const KfCorrection c = kf_correct(kf_predict(state, u, T, alpha), z);
  KfStep out;
  out.state = c.state;
  out.innovation = c.innovation;
  out.repaired = c.repaired;
  const Vec3k& x = c.state.x;
  out.theta.f_pll = u.f_pll + x(2) + x(1) / T;
  out.theta.f_dll = sf * out.theta.f_pll + x(0) / T;
  out.state.x(2) += u.f_pll - out.theta.f_pll;
  return out;
}

}  // namespace utalfa::loops
