#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "utalfa/harness/config.hpp"
#include "utalfa/harness/metrics.hpp"
#include "utalfa/signal/synth.hpp"

namespace utalfa::harness {

struct Comparison {
  std::string csv;
  json plot;
};

/// Side-by-side table of several reports from one scenario and seed, with
/// each metric also given relative to the first report.
inline Comparison compare(const std::vector<MetricsReport>& reports) {
  if (reports.size() < 2) throw ConfigError("compare needs at least two reports");
  const auto& ref = reports.front();
  for (const auto& r : reports) {
    if (r.scenario_hash != ref.scenario_hash) throw ConfigError("reports come from different scenarios");
    if (r.seed != ref.seed) throw ConfigError("reports use different seeds");
    if (r.fidelity != ref.fidelity) throw ConfigError("reports use different fidelities");
  }
  auto label = [](const MetricsReport& r) { return to_string(r.architecture); };
  std::set<std::string> seen;
  for (const auto& r : reports) {
    if (!seen.insert(label(r)).second) throw ConfigError("duplicate architecture " + label(r));
  }

  std::ostringstream os;
  os << std::setprecision(17);
  os << "prn,elevation_deg,cn0";
  for (const auto& r : reports) {
    const auto a = label(r);
    os << ',' << a << "_pseudorange_rmse," << a << "_doppler_rmse," << a << "_lock_fraction";
  }
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const auto a = label(reports[k]) + "_minus_" + label(ref);
    os << ',' << a << "_pseudorange_rmse," << a << "_doppler_rmse";
  }
  os << '\n';
  auto cell = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  auto diff = [](const std::optional<double>& a, const std::optional<double>& b) -> std::optional<double> {
    if (!a || !b) return std::nullopt;
    return *a - *b;
  };
  for (const auto& sat : ref.satellites) {
    for (const auto& lvl : sat.levels) {
      std::vector<const LevelMetrics*> row;
      for (const auto& r : reports) {
        const LevelMetrics* m = nullptr;
        for (const auto& s : r.satellites) {
          if (s.prn == sat.prn) m = s.level(lvl.cn0);
        }
        row.push_back(m);
      }
      os << sat.prn << ',' << sat.elevation_deg << ',' << lvl.cn0;
      for (const auto* m : row) {
        os << ',';
        if (m) cell(m->pseudorange_rmse);
        os << ',';
        if (m) cell(m->doppler_rmse);
        os << ',';
        if (m) os << m->lock_fraction;
      }
      for (std::size_t k = 1; k < row.size(); ++k) {
        os << ',';
        if (row[k] && row[0]) cell(diff(row[k]->pseudorange_rmse, row[0]->pseudorange_rmse));
        os << ',';
        if (row[k] && row[0]) cell(diff(row[k]->doppler_rmse, row[0]->doppler_rmse));
      }
      os << '\n';
    }
  }

  json plot;
  plot["x_label"] = "C/N0 (dB-Hz)";
  plot["y_scale"] = "log";
  plot["scenario_hash"] = ref.scenario_hash;
  plot["seed"] = ref.seed;
  plot["series"] = json::array();
  for (const auto& r : reports) {
    for (const auto& s : r.satellites) {
      for (const char* metric : {"pseudorange_rmse", "doppler_rmse"}) {
        json x = json::array(), y = json::array();
        for (const auto& l : s.levels) {
          const auto& v = std::string(metric) == "pseudorange_rmse" ? l.pseudorange_rmse : l.doppler_rmse;
          x.push_back(l.cn0);
          y.push_back(v ? json(*v) : json(nullptr));
        }
        plot["series"].push_back({{"architecture", label(r)},
                                  {"q_fd", r.q_fd},
                                  {"prn", s.prn},
                                  {"metric", metric},
                                  {"x", x},
                                  {"y", y}});
      }
    }
  }
  return {os.str(), plot};
}

/// Writes `count` samples starting at `first_index` as interleaved int8 I/Q
/// plus a JSON sidecar describing the capture.
inline void export_if(const signal::SignalSynthesizer& synth, std::int64_t first_index, std::size_t count,
                      std::uint64_t noise_seed, const std::string& path, const json& metadata) {
  if (!synth.options().quantize) throw ConfigError("IF export requires quantized samples");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto spb = static_cast<std::size_t>(std::llround(synth.options().fs * 1e-3));
  std::vector<std::int8_t> raw;
  for (std::size_t done = 0; done < count;) {
    const std::size_t n = std::min(spb, count - done);
    const auto blk = synth.synthesize(first_index + static_cast<std::int64_t>(done), n, noise_seed);
    raw.resize(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
      raw[2 * k] = static_cast<std::int8_t>(blk.samples[k].real());
      raw[2 * k + 1] = static_cast<std::int8_t>(blk.samples[k].imag());
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    done += n;
  }
  json side = metadata;
  side["format"] = "int8_iq_interleaved";
  side["fs"] = synth.options().fs;
  side["t_start"] = static_cast<double>(first_index) / synth.options().fs;
  side["n_samples"] = count;
  side["agc_scale"] = synth.agc_scale();
  write_text(path + ".json", side.dump(2) + "\n");
}

}  // namespace utalfa::harness
