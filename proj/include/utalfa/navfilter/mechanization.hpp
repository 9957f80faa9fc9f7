#pragma once

#include <Eigen/Geometry>

#include "utalfa/scenario/earth.hpp"
#include "utalfa/scenario/imu.hpp"

namespace utalfa::navfilter {

struct NavState {
  double t = 0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // body -> ECEF
  Vec3 b_a = Vec3::Zero();
  Vec3 b_g = Vec3::Zero();
  double clk_b = 0;  // m
  double clk_d = 0;  // m/s
};

/// Specific force of one IMU sample resolved in ECEF, bias removed.
inline Vec3 specific_force_ecef(const NavState& nav, const scenario::ImuSample& imu) {
  return nav.q * (imu.f_b - nav.b_a);
}

/// Kinematic acceleration in ECEF implied by an IMU sample.
inline Vec3 acceleration_ecef(const NavState& nav, const scenario::ImuSample& imu,
                              const scenario::EarthModel& earth) {
  return specific_force_ecef(nav, imu) + scenario::gravity(nav.p, earth) -
         2.0 * earth.rate().cross(nav.v);
}

/// One strapdown step from prev.t to curr.t. Attitude uses the mean body rate
/// and the Earth-rate frame rotation; specific force, gravity and Coriolis are
/// averaged over the interval (trapezoidal, with a velocity predictor).
inline NavState ins_mechanize(NavState nav, const scenario::ImuSample& prev, const scenario::ImuSample& curr,
                              const scenario::EarthModel& earth = {}) {
  const double dt = curr.t - prev.t;
  const Vec3 w_ie = earth.rate();
  const Eigen::Quaterniond q_old = nav.q;

  const Vec3 w_b = 0.5 * (prev.omega_b + curr.omega_b) - nav.b_g;
  const Eigen::Quaterniond q_body = scenario::rotation_vector_to_quat(w_b * dt);
  const Eigen::Quaterniond q_earth = scenario::rotation_vector_to_quat(-w_ie * dt);
  nav.q = (q_earth * q_old * q_body).normalized();

  const Vec3 f_old = q_old * (prev.f_b - nav.b_a);
  const Vec3 f_new = nav.q * (curr.f_b - nav.b_a);
  const Vec3 f_avg = 0.5 * (f_old + f_new);

  const Vec3 g_old = scenario::gravity(nav.p, earth);
  const Vec3 v_pred = nav.v + dt * (f_avg + g_old - 2.0 * w_ie.cross(nav.v));
  const Vec3 p_pred = nav.p + 0.5 * dt * (nav.v + v_pred);
  const Vec3 g_avg = 0.5 * (g_old + scenario::gravity(p_pred, earth));
  const Vec3 v_new = nav.v + dt * (f_avg + g_avg - w_ie.cross(nav.v + v_pred));

  nav.p += 0.5 * dt * (nav.v + v_new);
  nav.v = v_new;
  nav.clk_b += nav.clk_d * dt;
  nav.t = curr.t;
  return nav;
}

}  // namespace utalfa::navfilter
