#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "utalfa/navfilter/doppler.hpp"
#include "utalfa/scenario/cn0.hpp"
#include "utalfa/scenario/trajectory.hpp"

namespace utalfa::signal {

struct ReceiverClock {
  double bias = 0;   // c*dt_u at t = 0, m
  double drift = 0;  // m/s
  double jerk = 0;   // m/s^2

  double bias_at(double t) const { return bias + drift * t + 0.5 * jerk * t * t; }
  double drift_at(double t) const { return drift + jerk * t; }
};

/// Everything the synthesizer needs to know about one satellite at one instant.
struct SatSignalState {
  double tau = 0;         // code delay, s
  double tau_dot = 0;     // s/s
  double tau_ddot = 0;    // 1/s
  double code_chips = 0;  // received code phase f_chip*(t - tau), unwrapped chips
  double phi = 0;         // carrier phase, cycles (unwrapped)
  double fd = 0;          // Hz
  double fd_dot = 0;      // Hz/s
  int nav_bit = 1;
  double cn0 = 0;         // dB-Hz
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Truth signal parameters for every satellite as deterministic functions of
/// receiver time. Carrier phase is -f_c * tau + phi0, so f_d = d(phi)/dt and
/// the code rate equals f_chip * (1 + f_d / f_c).
class SignalTruth {
 public:
  using TrajectoryFn = std::function<scenario::TrajectoryState(double)>;

  SignalTruth(TrajectoryFn trajectory, std::vector<scenario::SatelliteTruth> sats,
              scenario::Cn0Schedule schedule, ReceiverClock clock, std::uint64_t bit_seed = 1)
      : trajectory_(std::move(trajectory)),
        sats_(std::move(sats)),
        schedule_(std::move(schedule)),
        clock_(clock),
        bit_seed_(bit_seed) {
    phi0_.reserve(sats_.size());
    for (const auto& s : sats_) {
      const auto h = splitmix64(bit_seed_ ^ (0xC0FFEEull + static_cast<std::uint64_t>(s.prn)));
      phi0_.push_back(static_cast<double>(h >> 11) * 0x1.0p-53);
    }
  }

  std::size_t size() const { return sats_.size(); }
  const std::vector<scenario::SatelliteTruth>& satellites() const { return sats_; }
  const scenario::SatelliteTruth& satellite(std::size_t i) const { return sats_[i]; }
  const scenario::Cn0Schedule& schedule() const { return schedule_; }
  const ReceiverClock& clock() const { return clock_; }
  scenario::TrajectoryState receiver(double t) const { return trajectory_(t); }

  navfilter::ReceiverKinematics kinematics(const scenario::TrajectoryState& s) const {
    return {s.p_u, s.v_u, s.a_u, clock_.drift_at(s.t), clock_.jerk};
  }

  /// True pseudorange |p_s - p_u| + c*dt_u - c*dt_s, m.
  double pseudorange(std::size_t i, double t) const {
    const auto rx = trajectory_(t);
    return navfilter::pseudorange(rx.p_u, clock_.bias_at(t), scenario::sat_pva(sats_[i], t));
  }

  double doppler(std::size_t i, double t) const {
    const auto rx = trajectory_(t);
    return navfilter::doppler_predict(kinematics(rx), scenario::sat_pva(sats_[i], t));
  }

  int nav_bit(std::size_t i, double code_chips) const {
    const auto k = static_cast<std::int64_t>(std::floor(code_chips / kChipsPerBit));
    const auto h = splitmix64(bit_seed_ * 0x100000001B3ull + static_cast<std::uint64_t>(sats_[i].prn) * 0x9E37ull +
                              static_cast<std::uint64_t>(k));
    return (h & 1u) ? 1 : -1;
  }

  SatSignalState evaluate(std::size_t i, double t) const {
    return evaluate(i, t, trajectory_(t));
  }

  SatSignalState evaluate(std::size_t i, double t, const scenario::TrajectoryState& rx) const {
    const auto sat = scenario::sat_pva(sats_[i], t);
    const auto kin = kinematics(rx);
    SatSignalState s;
    const double rho = navfilter::pseudorange(rx.p_u, clock_.bias_at(t), sat);
    s.fd = navfilter::doppler_predict(kin, sat);
    s.fd_dot = navfilter::doppler_rate(kin, sat);
    s.tau = rho / kSpeedOfLight;
    s.tau_dot = -s.fd / kL1Frequency;
    s.tau_ddot = -s.fd_dot / kL1Frequency;
    s.code_chips = kChipRate * (t - s.tau);
    s.phi = phi0_[i] - kL1Frequency * s.tau;
    s.nav_bit = nav_bit(i, s.code_chips);
    s.cn0 = scenario::cn0_at(schedule_, std::clamp(t, schedule_.t_begin(), schedule_.t_end()));
    return s;
  }

 private:
  TrajectoryFn trajectory_;
  std::vector<scenario::SatelliteTruth> sats_;
  scenario::Cn0Schedule schedule_;
  ReceiverClock clock_;
  std::uint64_t bit_seed_;
  std::vector<double> phi0_;
};

/// Builds the signal truth for a scenario (trajectory generator + satellites).
inline SignalTruth signal_truth_from_scenario(const scenario::FigureEight& traj,
                                              std::vector<scenario::SatelliteTruth> sats,
                                              scenario::Cn0Schedule schedule, ReceiverClock clock,
                                              std::uint64_t bit_seed = 1) {
  return SignalTruth([traj](double t) { return traj.state_at(t); }, std::move(sats), std::move(schedule), clock,
                     bit_seed);
}

}  // namespace utalfa::signal
