#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "utalfa/navfilter/ekf.hpp"
#include "utalfa/scenario/constellation.hpp"
#include "utalfa/scenario/imu.hpp"
#include "utalfa/signal/synth.hpp"

namespace utalfa::harness {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Architecture { stl, vdfll1, vdfll2, alfa };
enum class Fidelity { sample, measurement };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::stl: return "stl";
    case Architecture::vdfll1: return "vdfll1";
    case Architecture::vdfll2: return "vdfll2";
    case Architecture::alfa: return "alfa";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "stl") return Architecture::stl;
  if (s == "vdfll1") return Architecture::vdfll1;
  if (s == "vdfll2") return Architecture::vdfll2;
  if (s == "alfa") return Architecture::alfa;
  throw ConfigError("unknown architecture '" + s + "'");
}

inline std::string to_string(Fidelity f) { return f == Fidelity::sample ? "sample" : "measurement"; }

inline Fidelity parse_fidelity(const std::string& s) {
  if (s == "sample") return Fidelity::sample;
  if (s == "measurement") return Fidelity::measurement;
  throw ConfigError("unknown fidelity '" + s + "'");
}

inline bool is_vdfll(Architecture a) { return a == Architecture::vdfll1 || a == Architecture::vdfll2; }

struct LoopConfig {
  double T_I = 5e-3;           // s, whole code periods within one data bit
  double spacing = 0.5;        // chips
  double b_pll_stl = 10.0;     // Hz
  double b_pll_alfa = 3.0;     // Hz
  double b_dll = 1.0;          // Hz
  double K_f = 1.0;            // FLL assist gain, 1/s
  double K_cpg = 0.1;          // per epoch
  double staleness = 0.5;      // s
  double q_tau = 1e-6;         // chips^2 per epoch
  double q_phi = 1e-4;         // cycles^2 per epoch
  double q_fd_vdfll1 = 6.4e-3; // Hz^2 per epoch
  double q_fd_vdfll2 = 6.4e-5; // Hz^2 per epoch
  bool vdfll_code_dtau = false;        // add dtau_hat / T_I to the vector code command
  double vtl_carrier_phase_gain = 1.0; // weight of dphi_hat / T_I on the vector carrier command
  double init_code_error = 0.05;       // chips, initial replica offset scale
  double init_doppler_error = 2.0;     // Hz
};

struct NavConfig {
  double rate = 10.0;             // Hz
  double warmup = 30.0;           // s until ephemeris counts as decoded
  double trace_threshold = 30.0;  // m^2 + (m/s)^2, position/velocity block
  double gate_sigma = 5.0;
  double init_pos_sigma = 10.0;   // m per axis
  double init_vel_sigma = 0.5;    // m/s per axis
  double init_att_sigma = 1.0 * kPi / 180.0;  // rad per axis
  double init_clk_b_sigma = 10.0;  // m
  double init_clk_d_sigma = 0.5;   // m/s
  double sigma_rho_floor = 0.5;    // m
  double sigma_fd_floor = 0.02;    // Hz
  double b_fd = 3.0;               // Hz, bandwidth used to map Doppler variance
  navfilter::EkfNoise noise{};
};

struct LockConfig {
  double cn0_threshold = 22.0;  // dB-Hz
  double pli_threshold = 0.6;
  double window = 1.0;          // s
  double min_interval = 1.0;    // s between state changes
};

struct MetricsConfig {
  double convergence = 5.0;  // s after the mode switch excluded from RMSE
  double sample_rate = 10.0; // Hz
};

struct ScenarioConfig {
  double duration = 60.0;
  scenario::FigureEightParams trajectory{};
  scenario::EarthModel earth{};
  std::vector<scenario::SatelliteTruth> satellites;
  scenario::Cn0Schedule cn0 = scenario::Cn0Schedule::constant(45.0, 60.0);
  double imu_rate = 100.0;
  scenario::ImuErrors imu{};
  signal::ReceiverClock clock{};
  signal::SynthOptions signal{};
  LoopConfig loops{};
  NavConfig nav{};
  LockConfig lock{};
  MetricsConfig metrics{};
  double telemetry_rate = 10.0;  // Hz, 0 disables channel/nav telemetry
};

struct RunConfig {
  ScenarioConfig scenario;
  std::string scenario_path;
  Architecture architecture = Architecture::alfa;
  std::uint64_t seed = 1;
  std::string out_dir;
  Fidelity fidelity = Fidelity::sample;
};

namespace detail {

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  using detail::vec;
  json j;
  j["duration"] = c.duration;
  const auto& t = c.trajectory;
  j["trajectory"] = {{"center_llh", {t.center.lat, t.center.lon, t.center.h}},
                     {"loop_radius", t.loop_radius},
                     {"n_loops", t.n_loops},
                     {"v_max", t.v_max},
                     {"a_max", t.a_max},
                     {"dwell", t.dwell},
                     {"rate", t.rate}};
  j["earth"] = {{"gravity", c.earth.gravity}, {"earth_rotation", c.earth.earth_rotation}};
  j["satellites"] = json::array();
  for (const auto& s : c.satellites) {
    j["satellites"].push_back({{"prn", s.prn},
                               {"semi_major_axis", s.orbit.semi_major_axis},
                               {"inclination", s.orbit.inclination},
                               {"raan", s.orbit.raan},
                               {"arg_lat0", s.orbit.arg_lat0},
                               {"clock_bias", s.clock_bias},
                               {"clock_drift", s.clock_drift},
                               {"clock_jerk", s.clock_jerk}});
  }
  j["cn0"] = json::array();
  for (const auto& s : c.cn0.segments()) {
    j["cn0"].push_back({{"t_start", s.t_start}, {"t_end", s.t_end}, {"start", s.start_dbhz}, {"end", s.end_dbhz}});
  }
  j["imu"] = {{"rate", c.imu_rate},
              {"accel_bias", vec(c.imu.accel_bias)},
              {"gyro_bias", vec(c.imu.gyro_bias)},
              {"accel_noise_density", c.imu.accel_noise_density},
              {"gyro_noise_density", c.imu.gyro_noise_density}};
  j["receiver_clock"] = {{"bias", c.clock.bias}, {"drift", c.clock.drift}, {"jerk", c.clock.jerk}};
  j["signal"] = {{"fs", c.signal.fs}, {"noise_sigma", c.signal.noise_sigma}, {"quantize", c.signal.quantize}};
  const auto& l = c.loops;
  j["loops"] = {{"T_I", l.T_I},
                {"spacing", l.spacing},
                {"b_pll_stl", l.b_pll_stl},
                {"b_pll_alfa", l.b_pll_alfa},
                {"b_dll", l.b_dll},
                {"K_f", l.K_f},
                {"K_cpg", l.K_cpg},
                {"staleness", l.staleness},
                {"q_tau", l.q_tau},
                {"q_phi", l.q_phi},
                {"q_fd_vdfll1", l.q_fd_vdfll1},
                {"q_fd_vdfll2", l.q_fd_vdfll2},
                {"vdfll_code_dtau", l.vdfll_code_dtau},
                {"vtl_carrier_phase_gain", l.vtl_carrier_phase_gain},
                {"init_code_error", l.init_code_error},
                {"init_doppler_error", l.init_doppler_error}};
  const auto& n = c.nav;
  j["nav"] = {{"rate", n.rate},
              {"warmup", n.warmup},
              {"trace_threshold", n.trace_threshold},
              {"gate_sigma", n.gate_sigma},
              {"init_pos_sigma", n.init_pos_sigma},
              {"init_vel_sigma", n.init_vel_sigma},
              {"init_att_sigma", n.init_att_sigma},
              {"init_clk_b_sigma", n.init_clk_b_sigma},
              {"init_clk_d_sigma", n.init_clk_d_sigma},
              {"sigma_rho_floor", n.sigma_rho_floor},
              {"sigma_fd_floor", n.sigma_fd_floor},
              {"b_fd", n.b_fd},
              {"noise",
               {{"accel_psd", n.noise.accel_psd},
                {"gyro_psd", n.noise.gyro_psd},
                {"accel_bias_psd", n.noise.accel_bias_psd},
                {"gyro_bias_psd", n.noise.gyro_bias_psd},
                {"clock_bias_psd", n.noise.clock_bias_psd},
                {"clock_drift_psd", n.noise.clock_drift_psd}}}};
  j["lock"] = {{"cn0_threshold", c.lock.cn0_threshold},
               {"pli_threshold", c.lock.pli_threshold},
               {"window", c.lock.window},
               {"min_interval", c.lock.min_interval}};
  j["metrics"] = {{"convergence", c.metrics.convergence}, {"sample_rate", c.metrics.sample_rate}};
  j["telemetry_rate"] = c.telemetry_rate;
  return j;
}

inline void validate(const ScenarioConfig& c);

/// Parses a scenario tree. Missing keys keep their defaults; malformed or
/// inconsistent values raise ConfigError.
inline ScenarioConfig scenario_from_json(const json& j) {
  using detail::get;
  ScenarioConfig c;
  try {
    get(j, "duration", c.duration);
    if (j.contains("trajectory")) {
      const auto& t = j.at("trajectory");
      if (t.contains("center_llh")) {
        const auto& v = t.at("center_llh");
        if (!v.is_array() || v.size() != 3) throw ConfigError("trajectory.center_llh must be [lat, lon, h]");
        c.trajectory.center = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      }
      get(t, "loop_radius", c.trajectory.loop_radius);
      get(t, "n_loops", c.trajectory.n_loops);
      get(t, "v_max", c.trajectory.v_max);
      get(t, "a_max", c.trajectory.a_max);
      get(t, "dwell", c.trajectory.dwell);
      get(t, "rate", c.trajectory.rate);
    }
    if (j.contains("earth")) {
      get(j.at("earth"), "gravity", c.earth.gravity);
      get(j.at("earth"), "earth_rotation", c.earth.earth_rotation);
    }
    const Vec3 center = scenario::llh_to_ecef(c.trajectory.center);
    if (j.contains("satellites")) {
      for (const auto& s : j.at("satellites")) {
        scenario::SatelliteTruth sat;
        sat.prn = s.at("prn").get<int>();
        if (sat.prn < 1 || sat.prn > 32) throw ConfigError("satellite prn must be in 1..32");
        if (s.contains("azimuth")) {
          double incl = 55.0 * kPi / 180.0, a = 26'560'000.0;
          bool asc = true;
          get(s, "inclination", incl);
          get(s, "semi_major_axis", a);
          get(s, "ascending", asc);
          sat.orbit = scenario::orbit_through_look_angle(center, s.at("azimuth").get<double>(),
                                                         s.at("elevation").get<double>(), a, incl, asc);
        } else {
          get(s, "semi_major_axis", sat.orbit.semi_major_axis);
          get(s, "inclination", sat.orbit.inclination);
          get(s, "raan", sat.orbit.raan);
          get(s, "arg_lat0", sat.orbit.arg_lat0);
        }
        get(s, "clock_bias", sat.clock_bias);
        get(s, "clock_drift", sat.clock_drift);
        get(s, "clock_jerk", sat.clock_jerk);
        c.satellites.push_back(sat);
      }
    } else {
      c.satellites = scenario::constellation(center);
    }
    for (std::size_t a = 0; a < c.satellites.size(); ++a) {
      for (std::size_t b = a + 1; b < c.satellites.size(); ++b) {
        if (c.satellites[a].prn == c.satellites[b].prn) throw ConfigError("duplicate satellite prn");
      }
    }
    if (j.contains("cn0")) {
      std::vector<scenario::Cn0Segment> seg;
      for (const auto& s : j.at("cn0")) {
        seg.push_back({s.at("t_start").get<double>(), s.at("t_end").get<double>(), s.at("start").get<double>(),
                       s.at("end").get<double>()});
      }
      c.cn0 = scenario::Cn0Schedule(std::move(seg));
    } else {
      c.cn0 = scenario::Cn0Schedule::constant(45.0, c.duration);
    }
    if (j.contains("imu")) {
      const auto& m = j.at("imu");
      get(m, "rate", c.imu_rate);
      if (m.contains("accel_bias")) c.imu.accel_bias = detail::vec(m.at("accel_bias"));
      if (m.contains("gyro_bias")) c.imu.gyro_bias = detail::vec(m.at("gyro_bias"));
      get(m, "accel_noise_density", c.imu.accel_noise_density);
      get(m, "gyro_noise_density", c.imu.gyro_noise_density);
    }
    if (j.contains("receiver_clock")) {
      get(j.at("receiver_clock"), "bias", c.clock.bias);
      get(j.at("receiver_clock"), "drift", c.clock.drift);
      get(j.at("receiver_clock"), "jerk", c.clock.jerk);
    }
    if (j.contains("signal")) {
      get(j.at("signal"), "fs", c.signal.fs);
      get(j.at("signal"), "noise_sigma", c.signal.noise_sigma);
      get(j.at("signal"), "quantize", c.signal.quantize);
    }
    if (j.contains("loops")) {
      const auto& l = j.at("loops");
      auto& o = c.loops;
      get(l, "T_I", o.T_I);
      get(l, "spacing", o.spacing);
      get(l, "b_pll_stl", o.b_pll_stl);
      get(l, "b_pll_alfa", o.b_pll_alfa);
      get(l, "b_dll", o.b_dll);
      get(l, "K_f", o.K_f);
      get(l, "K_cpg", o.K_cpg);
      get(l, "staleness", o.staleness);
      get(l, "q_tau", o.q_tau);
      get(l, "q_phi", o.q_phi);
      get(l, "q_fd_vdfll1", o.q_fd_vdfll1);
      get(l, "q_fd_vdfll2", o.q_fd_vdfll2);
      get(l, "vdfll_code_dtau", o.vdfll_code_dtau);
      get(l, "vtl_carrier_phase_gain", o.vtl_carrier_phase_gain);
      get(l, "init_code_error", o.init_code_error);
      get(l, "init_doppler_error", o.init_doppler_error);
    }
    if (j.contains("nav")) {
      const auto& n = j.at("nav");
      auto& o = c.nav;
      get(n, "rate", o.rate);
      get(n, "warmup", o.warmup);
      get(n, "trace_threshold", o.trace_threshold);
      get(n, "gate_sigma", o.gate_sigma);
      get(n, "init_pos_sigma", o.init_pos_sigma);
      get(n, "init_vel_sigma", o.init_vel_sigma);
      get(n, "init_att_sigma", o.init_att_sigma);
      get(n, "init_clk_b_sigma", o.init_clk_b_sigma);
      get(n, "init_clk_d_sigma", o.init_clk_d_sigma);
      get(n, "sigma_rho_floor", o.sigma_rho_floor);
      get(n, "sigma_fd_floor", o.sigma_fd_floor);
      get(n, "b_fd", o.b_fd);
      if (n.contains("noise")) {
        const auto& q = n.at("noise");
        get(q, "accel_psd", o.noise.accel_psd);
        get(q, "gyro_psd", o.noise.gyro_psd);
        get(q, "accel_bias_psd", o.noise.accel_bias_psd);
        get(q, "gyro_bias_psd", o.noise.gyro_bias_psd);
        get(q, "clock_bias_psd", o.noise.clock_bias_psd);
        get(q, "clock_drift_psd", o.noise.clock_drift_psd);
      }
    }
    if (j.contains("lock")) {
      const auto& l = j.at("lock");
      get(l, "cn0_threshold", c.lock.cn0_threshold);
      get(l, "pli_threshold", c.lock.pli_threshold);
      get(l, "window", c.lock.window);
      get(l, "min_interval", c.lock.min_interval);
    }
    if (j.contains("metrics")) {
      get(j.at("metrics"), "convergence", c.metrics.convergence);
      get(j.at("metrics"), "sample_rate", c.metrics.sample_rate);
    }
    get(j, "telemetry_rate", c.telemetry_rate);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

/// Rejects configurations the harness cannot run.
inline void validate(const ScenarioConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.duration > 0, "duration must be positive");
  need(c.satellites.size() >= 1, "at least one satellite is required");
  need(c.cn0.t_begin() <= 0 && c.cn0.t_end() >= c.duration - 1e-9, "C/N0 schedule must cover [0, duration]");
  need(c.imu_rate > 0 && c.nav.rate > 0 && c.imu_rate >= c.nav.rate, "IMU rate must be >= nav rate");
  const double ratio = c.imu_rate / c.nav.rate;
  need(std::abs(ratio - std::round(ratio)) < 1e-9, "IMU rate must be a multiple of the nav rate");
  const double per_ms = c.imu_rate * 1e-3;
  need(std::abs(1.0 / per_ms - std::round(1.0 / per_ms)) < 1e-9, "IMU period must be a whole number of ms");
  need(c.signal.fs >= 2.1e6, "fs must exceed twice the chip rate");
  need(std::abs(c.signal.fs * 1e-3 - std::round(c.signal.fs * 1e-3)) < 1e-6, "fs must give whole samples per ms");
  const double periods = c.loops.T_I / kCodePeriod;
  need(c.loops.T_I > 0 && std::abs(periods - std::round(periods)) < 1e-9 &&
           kCodePeriodsPerBit % static_cast<int>(std::round(periods)) == 0,
       "T_I must be a whole number of code periods dividing the 20 ms bit");
  need(c.loops.spacing > 0 && c.loops.spacing <= 1.0, "correlator spacing must be in (0, 1]");
  need(c.loops.b_pll_stl * c.loops.T_I < 0.1 && c.loops.b_pll_alfa * c.loops.T_I < 0.1 && c.loops.b_pll_stl > 0 &&
           c.loops.b_pll_alfa > 0 && c.loops.b_dll > 0,
       "loop bandwidths must be positive with B*T_I < 0.1");
  need(c.loops.q_fd_vdfll1 > 0 && c.loops.q_fd_vdfll2 > 0 && c.loops.q_tau > 0 && c.loops.q_phi > 0,
       "VDFLL process noise must be positive");
  need(c.loops.K_cpg > 0 && c.loops.K_cpg <= 1.0, "K_cpg must be in (0, 1]");
  need(c.metrics.sample_rate > 0 && c.metrics.sample_rate <= c.nav.rate, "metrics rate must not exceed nav rate");
  const double mr = c.nav.rate / c.metrics.sample_rate;
  need(std::abs(mr - std::round(mr)) < 1e-9, "nav rate must be a multiple of the metrics rate");
  need(c.trajectory.rate >= c.imu_rate, "trajectory rate must be >= IMU rate");
  scenario::FigureEight check(c.trajectory, c.earth);
  (void)check;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

/// FNV-1a over the canonical serialization of the scenario.
inline std::string scenario_hash(const ScenarioConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// The figure-eight experiment: eight satellites, stationary warm-up, then
/// loops at 30 m/s and 10 m/s^2 while C/N0 drops from 50 dB-Hz to `target`.
inline ScenarioConfig figure_eight_preset(double target_dbhz = 30.0) {
  ScenarioConfig c;
  c.duration = 60.0;
  c.trajectory.center = {43.56 * kPi / 180.0, 1.48 * kPi / 180.0, 150.0};
  c.trajectory.n_loops = 2;
  c.trajectory.dwell = 5.0;
  c.satellites = scenario::constellation(scenario::llh_to_ecef(c.trajectory.center));
  c.cn0 = scenario::Cn0Schedule::staged(50.0, target_dbhz, 25.0, 30.0, c.duration);
  c.imu.accel_bias = Vec3(0.01, -0.01, 0.02);
  c.imu.gyro_bias = Vec3(1e-5, -1e-5, 2e-5);
  c.imu.accel_noise_density = 1e-3;
  c.imu.gyro_noise_density = 1e-5;
  c.clock = {3000.0, 1.5, 0.0};
  c.nav.warmup = 4.0;
  return c;
}

}  // namespace utalfa::harness
