#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "utalfa/scenario/trajectory.hpp"

namespace utalfa::scenario {

struct ImuSample {
  double t = 0;
  Vec3 f_b = Vec3::Zero();      // specific force, m/s^2
  Vec3 omega_b = Vec3::Zero();  // angular rate, rad/s
};

struct ImuErrors {
  Vec3 accel_bias = Vec3::Zero();  // m/s^2
  Vec3 gyro_bias = Vec3::Zero();   // rad/s
  double accel_noise_density = 0;  // m/s^2/sqrt(Hz)
  double gyro_noise_density = 0;   // rad/s/sqrt(Hz)
  std::uint64_t seed = 1;
};

/// Error-free IMU output for one truth sample (inverse strapdown).
inline ImuSample ideal_imu(const TrajectoryState& s, const EarthModel& earth) {
  const Mat3 C_eb = s.q.toRotationMatrix().transpose();
  const Vec3 w = earth.rate();
  ImuSample out;
  out.t = s.t;
  out.f_b = C_eb * (s.a_u + 2.0 * w.cross(s.v_u) - gravity(s.p_u, earth));
  out.omega_b = s.omega_b;
  return out;
}

/// Decimates the truth to `rate` and adds the configured sensor errors.
inline std::vector<ImuSample> synthesize_imu(const std::vector<TrajectoryState>& traj, double rate,
                                             const ImuErrors& errors, const EarthModel& earth = {}) {
  if (traj.size() < 2) throw std::invalid_argument("synthesize_imu: trajectory too short");
  if (!(rate > 0)) throw std::invalid_argument("synthesize_imu: rate must be positive");
  const double traj_dt = traj[1].t - traj[0].t;
  const double ratio = 1.0 / (rate * traj_dt);
  const auto step = static_cast<std::size_t>(std::llround(ratio));
  if (step < 1 || std::abs(ratio - static_cast<double>(step)) > 1e-6) {
    throw std::invalid_argument("synthesize_imu: trajectory rate must be an integer multiple of the IMU rate");
  }

  std::mt19937_64 rng(errors.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sa = errors.accel_noise_density * std::sqrt(rate);
  const double sg = errors.gyro_noise_density * std::sqrt(rate);

  std::vector<ImuSample> out;
  out.reserve(traj.size() / step + 1);
  for (std::size_t k = 0; k < traj.size(); k += step) {
    ImuSample m = ideal_imu(traj[k], earth);
    m.f_b += errors.accel_bias;
    m.omega_b += errors.gyro_bias;
    if (sa > 0 || sg > 0) {
      for (int i = 0; i < 3; ++i) m.f_b[i] += sa * n01(rng);
      for (int i = 0; i < 3; ++i) m.omega_b[i] += sg * n01(rng);
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace utalfa::scenario
