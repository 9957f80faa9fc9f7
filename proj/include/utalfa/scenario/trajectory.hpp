#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Geometry>

#include "utalfa/scenario/earth.hpp"

namespace utalfa::scenario {

struct TrajectoryState {
  double t = 0;
  Vec3 p_u = Vec3::Zero();        // ECEF position, m
  Vec3 v_u = Vec3::Zero();        // ECEF velocity, m/s
  Vec3 a_u = Vec3::Zero();        // ECEF acceleration, m/s^2
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // body -> ECEF
  Vec3 omega_b = Vec3::Zero();    // inertial angular rate in body axes, rad/s
};

struct FigureEightParams {
  Llh center{};
  double loop_radius = 0;   // lobe half-width, m; <= 0 picks the radius that hits a_max
  int n_loops = 6;
  double v_max = 30.0;      // m/s
  double a_max = 10.0;      // m/s^2
  double dwell = 10.0;      // s, at each end
  double rate = 100.0;      // Hz
};

/// Figure-eight (lemniscate of Gerono) flown at constant altitude:
///   east = A sin(theta), north = (A/2) sin(2 theta)
/// theta(t) follows a raised-cosine speed-up, a constant-rate cruise and a
/// symmetric slow-down, so acceleration is continuous everywhere. Each loop is
/// one full turn of theta and the path ends where it started.
class FigureEight {
 public:
  explicit FigureEight(const FigureEightParams& params, const EarthModel& earth = {})
      : params_(params), earth_(earth) {
    if (!(params.v_max > 0) || !(params.a_max > 0)) {
      throw std::invalid_argument("figure-eight: v_max and a_max must be positive");
    }
    if (params.rate < 10.0) throw std::invalid_argument("figure-eight: rate must be >= 10 Hz");
    if (params.n_loops < 0) throw std::invalid_argument("figure-eight: n_loops must be >= 0");
    if (params.dwell < 0) throw std::invalid_argument("figure-eight: negative dwell");

    radius_ = params.loop_radius > 0
                  ? params.loop_radius
                  : curvature_peak() * params.v_max * params.v_max / (2.0 * params.a_max);
    omega_ = params.v_max / (radius_ * std::sqrt(2.0));
    total_angle_ = kTwoPi * params.n_loops;
    ramp_ = kPi * params.v_max / params.a_max;
    if (total_angle_ < omega_ * ramp_) ramp_ = total_angle_ / omega_;
    cruise_ = total_angle_ > 0 ? total_angle_ / omega_ - ramp_ : 0.0;
    motion_ = params.n_loops > 0 ? 2.0 * ramp_ + cruise_ : 0.0;

    origin_ = llh_to_ecef(params.center);
    enu_ = enu_to_ecef(params.center);

    if (params.n_loops > 0) check_dynamics();
  }

  double duration() const { return 2.0 * params_.dwell + motion_; }
  double radius() const { return radius_; }
  double motion_start() const { return params_.dwell; }
  double motion_end() const { return params_.dwell + motion_; }
  const FigureEightParams& params() const { return params_; }
  const EarthModel& earth() const { return earth_; }

  TrajectoryState state_at(double t) const {
    double th = 0, thd = 0, thdd = 0;
    phase(t, th, thd, thdd);

    const double A = radius_;
    const Vec3 P(A * std::sin(th), 0.5 * A * std::sin(2 * th), 0);
    const Vec3 dP(A * std::cos(th), A * std::cos(2 * th), 0);
    const Vec3 ddP(-A * std::sin(th), -2 * A * std::sin(2 * th), 0);

    const Vec3 v_n = dP * thd;
    const Vec3 a_n = ddP * thd * thd + dP * thdd;

    // Heading of the path tangent, defined even when stationary.
    const double xp = std::cos(th), yp = std::cos(2 * th);
    const double xpp = -std::sin(th), ypp = -2 * std::sin(2 * th);
    const double yaw = std::atan2(yp, xp);
    const double yaw_rate = (xp * ypp - yp * xpp) / (xp * xp + yp * yp) * thd;

    TrajectoryState s;
    s.t = t;
    s.p_u = origin_ + enu_ * P;
    s.v_u = enu_ * v_n;
    s.a_u = enu_ * a_n;
    const Mat3 C_be = enu_ * Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    s.q = Eigen::Quaterniond(C_be).normalized();
    s.omega_b = Vec3(0, 0, yaw_rate) + C_be.transpose() * earth_.rate();
    return s;
  }

  std::vector<TrajectoryState> sample() const {
    const auto n = static_cast<std::size_t>(std::llround(duration() * params_.rate));
    std::vector<TrajectoryState> out;
    out.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out.push_back(state_at(static_cast<double>(k) / params_.rate));
    return out;
  }

 private:
  // max over theta of |P''(theta)| / A
  static double curvature_peak() {
    double m = 0;
    for (int i = 0; i <= 20000; ++i) {
      const double th = kPi * i / 20000.0;
      m = std::max(m, std::hypot(std::sin(th), 2 * std::sin(2 * th)));
    }
    return m;
  }

  void phase(double t, double& th, double& thd, double& thdd) const {
    th = thd = thdd = 0;
    if (params_.n_loops == 0) return;
    double tau = t - params_.dwell;
    if (tau <= 0) return;
    const double w = omega_;
    const double ramp_angle = 0.5 * w * ramp_;
    if (tau < ramp_) {
      const double x = kPi * tau / ramp_;
      th = 0.5 * w * (tau - ramp_ / kPi * std::sin(x));
      thd = 0.5 * w * (1 - std::cos(x));
      thdd = 0.5 * w * kPi / ramp_ * std::sin(x);
      return;
    }
    tau -= ramp_;
    if (tau < cruise_) {
      th = ramp_angle + w * tau;
      thd = w;
      return;
    }
    tau -= cruise_;
    if (tau < ramp_) {
      // mirror of the speed-up
      const double r = ramp_ - tau;
      const double x = kPi * r / ramp_;
      th = total_angle_ - 0.5 * w * (r - ramp_ / kPi * std::sin(x));
      thd = 0.5 * w * (1 - std::cos(x));
      thdd = -0.5 * w * kPi / ramp_ * std::sin(x);
      return;
    }
    th = total_angle_;
  }

  void check_dynamics() const {
    double peak = 0;
    const double dt = 1.0 / params_.rate;
    for (double t = params_.dwell; t <= motion_end(); t += dt) peak = std::max(peak, state_at(t).a_u.norm());
    if (peak > 1.05 * params_.a_max) {
      throw std::invalid_argument("figure-eight: loop radius too tight for v_max/a_max (peak " +
                                  std::to_string(peak) + " m/s^2)");
    }
  }

  FigureEightParams params_;
  EarthModel earth_;
  double radius_ = 0;
  double omega_ = 0;
  double total_angle_ = 0;
  double ramp_ = 0;
  double cruise_ = 0;
  double motion_ = 0;
  Vec3 origin_;
  Mat3 enu_;
};

inline std::vector<TrajectoryState> gen_figure_eight(const FigureEightParams& params,
                                                     const EarthModel& earth = {}) {
  return FigureEight(params, earth).sample();
}

}  // namespace utalfa::scenario
