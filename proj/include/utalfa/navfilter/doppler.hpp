#pragma once

#include "utalfa/scenario/orbit.hpp"

namespace utalfa::navfilter {

/// Receiver kinematics and clock needed by the carrier Doppler model.
struct ReceiverKinematics {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  double clk_d = 0;  // c*dt_u rate, m/s
  double clk_j = 0;  // c*dt_u second derivative, m/s^2
};

// Carrier Doppler
//   f_d = -(f_c/c) * ( u^T (v_u - v_s) + c*dtdot_u - c*dtdot_s )
// with u the unit line of sight from the satellite to the receiver, i.e.
// u = -e_rho. With that orientation f_d is the time derivative of the carrier
// phase -(f_c/c) * pseudorange, so approaching satellites give positive Doppler
// and code and carrier stay coherent. The synthesizer and the receiver both
// use these two functions.

inline double doppler_predict(const ReceiverKinematics& rx, const scenario::SatPva& sat) {
  const Vec3 e = (sat.p - rx.p).normalized();
  return -kHzPerMps * (e.dot(sat.v - rx.v) + rx.clk_d - sat.clk_d);
}

/// Time derivative of doppler_predict.
inline double doppler_rate(const ReceiverKinematics& rx, const scenario::SatPva& sat) {
  const auto g = scenario::geometry(rx.p, rx.v, sat);
  return -kHzPerMps * (g.e_rho_dot.dot(sat.v - rx.v) + g.e_rho.dot(sat.a - rx.a) + rx.clk_j - sat.clk_j);
}

/// Pseudorange |p_s - p_u| + c*dt_u - c*dt_s and its rate.
inline double pseudorange(const Vec3& p_u, double clk_b, const scenario::SatPva& sat) {
  return (sat.p - p_u).norm() + clk_b - sat.clk_b;
}

inline double pseudorange_rate(const ReceiverKinematics& rx, const scenario::SatPva& sat) {
  const Vec3 e = (sat.p - rx.p).normalized();
  return e.dot(sat.v - rx.v) + rx.clk_d - sat.clk_d;
}

}  // namespace utalfa::navfilter
