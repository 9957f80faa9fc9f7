#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "utalfa/scenario/earth.hpp"

namespace utalfa::scenario {

struct CircularOrbit {
  double semi_major_axis = 26'560'000.0;  // m
  double inclination = 55.0 * kPi / 180.0;
  double raan = 0;
  double arg_lat0 = 0;  // argument of latitude at t = 0
};

struct SatelliteTruth {
  int prn = 1;
  CircularOrbit orbit{};
  double clock_bias = 0;   // c*dt_s, m
  double clock_drift = 0;  // m/s
  double clock_jerk = 0;   // m/s^2
  bool frozen = false;     // test mode: satellite held at its t = 0 position
};

/// Satellite position/velocity/acceleration and clock terms at one epoch.
struct SatPva {
  int prn = 0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  double clk_b = 0;
  double clk_d = 0;
  double clk_j = 0;
};

/// Circular Keplerian kinematics expressed directly in the scenario frame.
inline SatPva sat_pva(const SatelliteTruth& sat, double t) {
  const auto& o = sat.orbit;
  const double a = o.semi_major_axis;
  const double n = std::sqrt(kEarthMu / (a * a * a));
  const double u = o.arg_lat0 + (sat.frozen ? 0.0 : n * t);
  const double cu = std::cos(u), su = std::sin(u);
  const double ci = std::cos(o.inclination), si = std::sin(o.inclination);
  const double cO = std::cos(o.raan), sO = std::sin(o.raan);

  const Vec3 r_hat(cO * cu - sO * ci * su, sO * cu + cO * ci * su, si * su);
  const Vec3 t_hat(-cO * su - sO * ci * cu, -sO * su + cO * ci * cu, si * cu);

  SatPva out;
  out.prn = sat.prn;
  out.p = a * r_hat;
  if (!sat.frozen) {
    out.v = a * n * t_hat;
    out.a = -n * n * out.p;
  }
  out.clk_b = sat.clock_bias + sat.clock_drift * t + 0.5 * sat.clock_jerk * t * t;
  out.clk_d = sat.clock_drift + sat.clock_jerk * t;
  out.clk_j = sat.clock_jerk;
  return out;
}

/// Places a satellite on a circular orbit so that at t = 0 it is seen from
/// `user` at the given azimuth/elevation. `ascending` picks which of the two
/// orbit planes through that point is used.
inline CircularOrbit orbit_through_look_angle(const Vec3& user, double azimuth, double elevation,
                                              double semi_major_axis, double inclination,
                                              bool ascending = true) {
  const Mat3 enu = enu_to_ecef(ecef_to_llh(user));
  const Vec3 los = enu * Vec3(std::cos(elevation) * std::sin(azimuth),
                              std::cos(elevation) * std::cos(azimuth), std::sin(elevation));
  const double b = user.dot(los);
  const double r = -b + std::sqrt(b * b - user.squaredNorm() + semi_major_axis * semi_major_axis);
  const Vec3 u_hat = (user + r * los) / semi_major_axis;

  CircularOrbit o;
  o.semi_major_axis = semi_major_axis;
  const double min_incl = std::asin(std::min(1.0, std::abs(u_hat.z()))) + 1e-6;
  o.inclination = std::max(inclination, min_incl);
  const double si = std::sin(o.inclination), ci = std::cos(o.inclination);
  double u0 = std::asin(std::clamp(u_hat.z() / si, -1.0, 1.0));
  if (!ascending) u0 = kPi - u0;
  o.arg_lat0 = u0;
  o.raan = std::atan2(u_hat.y(), u_hat.x()) - std::atan2(ci * std::sin(u0), std::cos(u0));
  return o;
}

struct Geometry {
  double range = 0;
  Vec3 e_rho = Vec3::Zero();      // unit line of sight, receiver -> satellite
  Vec3 e_rho_dot = Vec3::Zero();  // 1/s
  double elevation = 0;           // rad
};

inline Geometry geometry(const Vec3& p_u, const Vec3& v_u, const SatPva& sat) {
  const Vec3 d = sat.p - p_u;
  const double range = d.norm();
  if (!(range > 0)) throw std::invalid_argument("geometry: zero range");
  Geometry g;
  g.range = range;
  g.e_rho = d / range;
  const Vec3 v_rel = sat.v - v_u;
  g.e_rho_dot = (v_rel - g.e_rho * g.e_rho.dot(v_rel)) / range;
  const Mat3 enu = enu_to_ecef(ecef_to_llh(p_u));
  g.elevation = std::asin(std::clamp(g.e_rho.dot(enu.col(2)), -1.0, 1.0));
  return g;
}

inline Geometry geometry(const Vec3& p_u, const Vec3& v_u, const SatelliteTruth& sat, double t) {
  return geometry(p_u, v_u, sat_pva(sat, t));
}

}  // namespace utalfa::scenario
