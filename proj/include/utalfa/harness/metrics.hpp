#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "utalfa/harness/config.hpp"

namespace utalfa::harness {

/// Root-mean-square of the values whose mask entry is set; nullopt when none
/// are (no data, never zero).
inline std::optional<double> rmse(const std::vector<double>& values, const std::vector<bool>& mask) {
  if (values.size() != mask.size()) throw std::invalid_argument("rmse: values and mask differ in length");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!mask[k]) continue;
    s += values[k] * values[k];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(s / static_cast<double>(n));
}

inline std::optional<double> rmse(const std::vector<double>& values) {
  return rmse(values, std::vector<bool>(values.size(), true));
}

/// One channel sampled at a nav epoch.
struct MetricSample {
  double t = 0;
  bool locked = false;
  bool has_obs = false;
  double rho_err = 0;  // m, measured minus true pseudorange
  double fd_err = 0;   // Hz, measured minus true Doppler
};

struct LevelMetrics {
  double cn0 = 0;  // dB-Hz
  double t_start = 0, t_end = 0;
  std::optional<double> pseudorange_rmse;
  std::optional<double> doppler_rmse;
  double lock_fraction = 0;
  std::size_t samples = 0;  // samples in the window
  std::size_t locked_samples = 0;
};

struct SatelliteMetrics {
  int prn = 0;
  double elevation_deg = 0;
  std::vector<LevelMetrics> levels;

  const LevelMetrics* level(double cn0) const {
    for (const auto& l : levels) {
      if (std::abs(l.cn0 - cn0) < 1e-9) return &l;
    }
    return nullptr;
  }
};

struct MetricsReport {
  std::string scenario_hash;
  Architecture architecture = Architecture::alfa;
  Fidelity fidelity = Fidelity::sample;
  std::uint64_t seed = 0;
  std::optional<double> switch_time;
  std::optional<double> position_rmse;
  double q_fd = 0;  // VDFLL Doppler process noise, 0 otherwise
  std::vector<SatelliteMetrics> satellites;
};

/// Buckets samples by the constant-C/N0 segments of the schedule, counting
/// only samples at or after `t_from`. RMSE uses locked samples with an
/// observation; lock fraction uses every sample in the window.
inline std::vector<LevelMetrics> bucket_levels(const std::vector<MetricSample>& samples,
                                               const scenario::Cn0Schedule& schedule, double t_from) {
  std::vector<LevelMetrics> out;
  for (const auto& seg : schedule.segments()) {
    if (seg.start_dbhz != seg.end_dbhz) continue;
    LevelMetrics l;
    l.cn0 = seg.start_dbhz;
    l.t_start = std::max(seg.t_start, t_from);
    l.t_end = seg.t_end;
    std::vector<double> rho, fd;
    for (const auto& s : samples) {
      if (s.t < l.t_start || s.t > l.t_end) continue;
      ++l.samples;
      if (!s.locked) continue;
      ++l.locked_samples;
      if (s.has_obs) {
        rho.push_back(s.rho_err);
        fd.push_back(s.fd_err);
      }
    }
    if (l.samples == 0) continue;
    l.lock_fraction = static_cast<double>(l.locked_samples) / static_cast<double>(l.samples);
    l.pseudorange_rmse = rmse(rho);
    l.doppler_rmse = rmse(fd);
    out.push_back(l);
  }
  return out;
}

namespace detail {

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline json to_json(const MetricsReport& r) {
  json j;
  j["scenario_hash"] = r.scenario_hash;
  j["architecture"] = to_string(r.architecture);
  j["fidelity"] = to_string(r.fidelity);
  j["seed"] = r.seed;
  j["switch_time"] = detail::opt(r.switch_time);
  j["position_rmse"] = detail::opt(r.position_rmse);
  j["q_fd"] = r.q_fd;
  j["satellites"] = json::array();
  for (const auto& s : r.satellites) {
    json js{{"prn", s.prn}, {"elevation_deg", s.elevation_deg}, {"levels", json::array()}};
    for (const auto& l : s.levels) {
      js["levels"].push_back({{"cn0", l.cn0},
                              {"t_start", l.t_start},
                              {"t_end", l.t_end},
                              {"pseudorange_rmse", detail::opt(l.pseudorange_rmse)},
                              {"doppler_rmse", detail::opt(l.doppler_rmse)},
                              {"lock_fraction", l.lock_fraction},
                              {"samples", l.samples},
                              {"locked_samples", l.locked_samples}});
    }
    j["satellites"].push_back(js);
  }
  return j;
}

inline MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  try {
    r.scenario_hash = j.at("scenario_hash").get<std::string>();
    r.architecture = parse_architecture(j.at("architecture").get<std::string>());
    r.fidelity = parse_fidelity(j.at("fidelity").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.switch_time = detail::opt(j.at("switch_time"));
    r.position_rmse = detail::opt(j.at("position_rmse"));
    r.q_fd = j.value("q_fd", 0.0);
    for (const auto& js : j.at("satellites")) {
      SatelliteMetrics s;
      s.prn = js.at("prn").get<int>();
      s.elevation_deg = js.at("elevation_deg").get<double>();
      for (const auto& jl : js.at("levels")) {
        LevelMetrics l;
        l.cn0 = jl.at("cn0").get<double>();
        l.t_start = jl.at("t_start").get<double>();
        l.t_end = jl.at("t_end").get<double>();
        l.pseudorange_rmse = detail::opt(jl.at("pseudorange_rmse"));
        l.doppler_rmse = detail::opt(jl.at("doppler_rmse"));
        l.lock_fraction = jl.at("lock_fraction").get<double>();
        l.samples = jl.at("samples").get<std::size_t>();
        l.locked_samples = jl.at("locked_samples").get<std::size_t>();
        s.levels.push_back(l);
      }
      r.satellites.push_back(s);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

/// One row per satellite and level. Empty cells mean no data.
inline std::string to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "architecture,seed,prn,elevation_deg,cn0,pseudorange_rmse,doppler_rmse,lock_fraction,samples\n";
  for (const auto& s : r.satellites) {
    for (const auto& l : s.levels) {
      os << to_string(r.architecture) << ',' << r.seed << ',' << s.prn << ',' << s.elevation_deg << ',' << l.cn0
         << ',';
      if (l.pseudorange_rmse) os << *l.pseudorange_rmse;
      os << ',';
      if (l.doppler_rmse) os << *l.doppler_rmse;
      os << ',' << l.lock_fraction << ',' << l.samples << '\n';
    }
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline void write_report(const MetricsReport& r, const std::string& dir) {
  write_text(dir + "/metrics.json", to_json(r).dump(2) + "\n");
  write_text(dir + "/metrics.csv", to_csv(r));
}

inline MetricsReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace utalfa::harness
