#pragma once

#include <cmath>

#include <Eigen/Geometry>

#include "utalfa/constants.hpp"

namespace utalfa::scenario {

/// Which Earth effects the scenario frame carries. Both flags off gives an
/// inertial, gravity-free frame used by unit tests.
struct EarthModel {
  bool gravity = true;
  bool earth_rotation = true;

  Vec3 rate() const { return earth_rotation ? Vec3(0, 0, kEarthRate) : Vec3::Zero(); }
};

/// Point-mass gravitation plus, when the frame rotates, the centrifugal term.
inline Vec3 gravity(const Vec3& p, const EarthModel& earth) {
  Vec3 g = Vec3::Zero();
  if (earth.gravity) {
    const double r = p.norm();
    g = -kEarthMu / (r * r * r) * p;
  }
  if (earth.earth_rotation) {
    const Vec3 w = earth.rate();
    g -= w.cross(w.cross(p));
  }
  return g;
}

/// Jacobian of gravity() with respect to position.
inline Mat3 gravity_gradient(const Vec3& p, const EarthModel& earth) {
  Mat3 G = Mat3::Zero();
  if (earth.gravity) {
    const double r = p.norm();
    const Vec3 u = p / r;
    G = -kEarthMu / (r * r * r) * (Mat3::Identity() - 3.0 * u * u.transpose());
  }
  if (earth.earth_rotation) {
    const Vec3 w = earth.rate();
    Mat3 W;
    W << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    G -= W * W;
  }
  return G;
}

struct Llh {
  double lat = 0;  // rad
  double lon = 0;  // rad
  double h = 0;    // m
};

inline Vec3 llh_to_ecef(const Llh& llh) {
  const double e2 = kWgs84F * (2.0 - kWgs84F);
  const double s = std::sin(llh.lat);
  const double n = kWgs84A / std::sqrt(1.0 - e2 * s * s);
  const double c = std::cos(llh.lat);
  return {(n + llh.h) * c * std::cos(llh.lon), (n + llh.h) * c * std::sin(llh.lon),
          (n * (1.0 - e2) + llh.h) * s};
}

inline Llh ecef_to_llh(const Vec3& p) {
  const double e2 = kWgs84F * (2.0 - kWgs84F);
  const double rho = std::hypot(p.x(), p.y());
  Llh out;
  out.lon = std::atan2(p.y(), p.x());
  double lat = std::atan2(p.z(), rho * (1.0 - e2));
  double h = 0;
  for (int i = 0; i < 8; ++i) {
    const double s = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - e2 * s * s);
    h = rho > 1e-9 ? rho / std::cos(lat) - n : std::abs(p.z()) - n * (1.0 - e2);
    lat = std::atan2(p.z(), rho * (1.0 - e2 * n / (n + h)));
  }
  out.lat = lat;
  out.h = h;
  return out;
}

/// Rotation whose columns are the local East, North, Up axes in ECEF.
inline Mat3 enu_to_ecef(const Llh& llh) {
  const double sl = std::sin(llh.lat), cl = std::cos(llh.lat);
  const double so = std::sin(llh.lon), co = std::cos(llh.lon);
  Mat3 R;
  R.col(0) = Vec3(-so, co, 0);
  R.col(1) = Vec3(-sl * co, -sl * so, cl);
  R.col(2) = Vec3(cl * co, cl * so, sl);
  return R;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

/// Quaternion for a rotation vector (axis * angle).
inline Eigen::Quaterniond rotation_vector_to_quat(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    return Eigen::Quaterniond(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()).normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, rv / angle));
}

}  // namespace utalfa::scenario
