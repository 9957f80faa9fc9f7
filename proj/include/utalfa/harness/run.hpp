#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "utalfa/harness/channel.hpp"
#include "utalfa/harness/config.hpp"
#include "utalfa/harness/metrics.hpp"
#include "utalfa/navfilter/ekf.hpp"
#include "utalfa/navfilter/mechanization.hpp"
#include "utalfa/scenario/imu.hpp"
#include "utalfa/signal/synth.hpp"

namespace utalfa::harness {

/// Navigation filter state after one nav epoch.
struct NavRecord {
  double t = 0;
  navfilter::Mode mode = navfilter::Mode::STL;
  double pos_err = 0;  // m
  double vel_err = 0;  // m/s
  double att_err = 0;  // rad
  double trace = 0;    // position/velocity covariance trace
  int accepted = 0;
  int rejected = 0;
  int locked = 0;
  double cov_asymmetry = 0;  // max |P - P^T| relative to max |P|
  double cov_min_eig = 0;    // smallest eigenvalue of P relative to max |P|
  double q_norm_err = 0;     // | |q| - 1 |
};

struct RunObserver {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const NavRecord&)> on_nav;
};

struct RunResult {
  MetricsReport report;
  std::vector<std::vector<MetricSample>> samples;  // per satellite
  std::vector<NavRecord> nav;
};

/// Independent streams derived from the run seed.
struct RunSeeds {
  std::uint64_t bits, noise, imu, init;

  explicit RunSeeds(std::uint64_t seed)
      : bits(signal::splitmix64(seed ^ 0x1111)),
        noise(signal::splitmix64(seed ^ 0x2222)),
        imu(signal::splitmix64(seed ^ 0x3333)),
        init(signal::splitmix64(seed ^ 0x4444)) {}
};

/// Pseudorange and Doppler 1-sigma implied by a C/N0 estimate for the
/// thermal-noise floors of a DLL and a carrier loop of the given bandwidths.
inline std::pair<double, double> observation_sigmas(double cn0_dbhz, const ScenarioConfig& c) {
  const double cn0 = std::pow(10.0, std::max(cn0_dbhz, 10.0) / 10.0);
  const double T = c.loops.T_I, d = c.loops.spacing;
  const double var_tau = c.loops.b_dll * d / (2.0 * cn0) * (1.0 + 2.0 / ((2.0 - d) * T * cn0));
  const double sigma_rho = std::max(c.nav.sigma_rho_floor, std::sqrt(var_tau) * kSpeedOfLight / kChipRate);
  const double var_phi = c.nav.b_fd / cn0 * (1.0 + 1.0 / (2.0 * T * cn0));  // rad^2
  const double sigma_fd = std::max(c.nav.sigma_fd_floor, (c.nav.b_fd / 0.53) * std::sqrt(var_phi) / kTwoPi);
  return {sigma_rho, sigma_fd};
}

inline double elevation_deg(const scenario::Llh& site, const Vec3& user, const Vec3& sat) {
  const Vec3 up(std::cos(site.lat) * std::cos(site.lon), std::cos(site.lat) * std::sin(site.lon), std::sin(site.lat));
  return std::asin(std::clamp((sat - user).normalized().dot(up), -1.0, 1.0)) * 180.0 / kPi;
}

namespace detail {

class Telemetry {
 public:
  explicit Telemetry(const std::string& dir) {
    if (dir.empty()) return;
    ch_.open(dir + "/channels.jsonl", std::ios::binary);
    nav_.open(dir + "/nav.jsonl", std::ios::binary);
    if (!ch_ || !nav_) throw std::runtime_error("cannot open telemetry files in " + dir);
  }

  bool enabled() const { return ch_.is_open(); }

  void channel(double t, const EpochRecord* r, int prn, double rho_err, double fd_err, std::optional<double> cn0,
               std::optional<double> pli, std::optional<double> fd_dot_err) {
    if (!enabled()) return;
    json j{{"t", t}, {"prn", prn}};
    j["fd_dot_err"] = fd_dot_err ? json(*fd_dot_err) : json(nullptr);
    if (r) {
      j["locked"] = r->locked;
      j["stale"] = r->stale;
      j["f_pll"] = r->theta_next.f_pll;
      j["f_dll"] = r->theta_next.f_dll;
      j["fd_estimate"] = r->fd_estimate;
      j["rho_err"] = r->obs ? json(rho_err) : json(nullptr);
      j["fd_err"] = r->obs ? json(fd_err) : json(nullptr);
    }
    j["cn0_estimate"] = cn0 ? json(*cn0) : json(nullptr);
    j["pli"] = pli ? json(*pli) : json(nullptr);
    ch_ << j.dump() << '\n';
  }

  void nav(const NavRecord& n) {
    if (!enabled()) return;
    nav_ << json{{"t", n.t},
                 {"mode", n.mode == navfilter::Mode::VTL ? "vtl" : "stl"},
                 {"pos_err", n.pos_err},
                 {"vel_err", n.vel_err},
                 {"att_err", n.att_err},
                 {"trace", n.trace},
                 {"accepted", n.accepted},
                 {"rejected", n.rejected},
                 {"locked", n.locked},
                 {"cov_asymmetry", n.cov_asymmetry},
                 {"cov_min_eig", n.cov_min_eig},
                 {"q_norm_err", n.q_norm_err}}
                .dump()
         << '\n';
  }

 private:
  std::ofstream ch_, nav_;
};

}  // namespace detail

/// Runs one architecture through the scenario and returns its metrics. When
/// `rc.out_dir` is set the metrics, the resolved scenario and the telemetry
/// streams are written there.
inline RunResult run(const RunConfig& rc, const RunObserver* observer = nullptr) {
  const ScenarioConfig& sc = rc.scenario;
  validate(sc);
  const RunSeeds seeds(rc.seed);
  const bool sample_mode = rc.fidelity == Fidelity::sample;
  if (!rc.out_dir.empty()) std::filesystem::create_directories(rc.out_dir);

  const scenario::FigureEight traj(sc.trajectory, sc.earth);
  const signal::SignalTruth truth = signal::signal_truth_from_scenario(traj, sc.satellites, sc.cn0, sc.clock, seeds.bits);

  const auto n_imu = static_cast<std::size_t>(std::llround(sc.duration * sc.imu_rate));
  std::vector<scenario::TrajectoryState> imu_truth;
  imu_truth.reserve(n_imu + 1);
  for (std::size_t k = 0; k <= n_imu; ++k) imu_truth.push_back(traj.state_at(static_cast<double>(k) / sc.imu_rate));
  scenario::ImuErrors imu_err = sc.imu;
  imu_err.seed = seeds.imu;
  const auto imu = scenario::synthesize_imu(imu_truth, sc.imu_rate, imu_err, sc.earth);

  signal::SynthOptions synth_opt = sc.signal;
  const signal::SignalSynthesizer synth(truth, synth_opt);
  const auto spb = static_cast<std::int64_t>(std::llround(sc.signal.fs * 1e-3));

  std::vector<ChannelRuntime> channels;
  std::vector<AnalyticCorrelator> analytic;
  channels.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    channels.emplace_back(sc, rc.architecture, truth, i, seeds.init);
    analytic.emplace_back(sc.signal.fs, sc.signal.noise_sigma, sc.loops.spacing,
                          signal::splitmix64(seeds.noise ^ static_cast<std::uint64_t>(truth.satellite(i).prn)));
  }

  // Navigation filter starts from a perturbed truth.
  navfilter::NavState nav;
  navfilter::EkfErrorState err;
  {
    std::mt19937_64 rng(seeds.init);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto rv = [&](double s) { return Vec3(s * n01(rng), s * n01(rng), s * n01(rng)); };
    const auto& t0 = imu_truth.front();
    nav.t = 0;
    nav.p = t0.p_u + rv(sc.nav.init_pos_sigma);
    nav.v = t0.v_u + rv(sc.nav.init_vel_sigma);
    nav.q = (scenario::rotation_vector_to_quat(rv(sc.nav.init_att_sigma)) * t0.q).normalized();
    nav.clk_b = sc.clock.bias_at(0) + sc.nav.init_clk_b_sigma * n01(rng);
    nav.clk_d = sc.clock.drift_at(0) + sc.nav.init_clk_d_sigma * n01(rng);
    err.x.setZero();
    err.P.setZero();
    auto set3 = [&](int k, double s) { err.P.block<3, 3>(k, k) = s * s * Mat3::Identity(); };
    set3(navfilter::kP, sc.nav.init_pos_sigma);
    set3(navfilter::kV, sc.nav.init_vel_sigma);
    set3(navfilter::kPsi, sc.nav.init_att_sigma);
    set3(navfilter::kBa, std::max(sc.imu.accel_bias.norm(), 1e-3));
    set3(navfilter::kBg, std::max(sc.imu.gyro_bias.norm(), 1e-6));
    err.P(navfilter::kClkB, navfilter::kClkB) = sc.nav.init_clk_b_sigma * sc.nav.init_clk_b_sigma;
    err.P(navfilter::kClkD, navfilter::kClkD) = sc.nav.init_clk_d_sigma * sc.nav.init_clk_d_sigma;
  }
  navfilter::ModeSwitch sw(sc.nav.trace_threshold, 4, 1.0);
  std::vector<loops::ChannelFeedback> feedback(truth.size());

  detail::Telemetry tel(sc.telemetry_rate > 0 ? rc.out_dir : std::string());
  RunResult res;
  res.samples.resize(truth.size());

  const auto n_blocks = static_cast<std::int64_t>(std::llround(sc.duration * 1e3));
  // The navigation timeline trails the signal by `lag` blocks so every channel
  // has closed the integration ending nearest each nav epoch.
  const std::int64_t lag = static_cast<std::int64_t>(std::floor(sc.loops.T_I * 1e3 / 2.0)) + 1;
  const auto blocks_per_imu = static_cast<std::int64_t>(std::llround(1e3 / sc.imu_rate));
  const auto blocks_per_nav = static_cast<std::int64_t>(std::llround(1e3 / sc.nav.rate));
  const auto navs_per_metric = static_cast<std::int64_t>(std::llround(sc.nav.rate / sc.metrics.sample_rate));
  const std::int64_t navs_per_tel =
      sc.telemetry_rate > 0 ? std::max<std::int64_t>(1, std::llround(sc.nav.rate / sc.telemetry_rate)) : 0;

  bool aiding = false;
  std::vector<bool> aided(truth.size(), false);
  auto publish = [&](std::size_t k) {
    std::vector<scenario::SatPva> sats(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) sats[i] = scenario::sat_pva(truth.satellite(i), nav.t);
    const Vec3 a_u = navfilter::acceleration_ecef(nav, imu[k], sc.earth);
    feedback = navfilter::make_feedback(nav, sats, aided, a_u);
    for (std::size_t i = 0; i < truth.size(); ++i) channels[i].set_feedback(feedback[i]);
  };

  std::vector<std::complex<float>> buf;
  std::int64_t buf_start = 0;

  for (std::int64_t b = 0; b < n_blocks + lag; ++b) {
    const std::int64_t block_end = (b + 1) * spb;
    if (sample_mode && b < n_blocks) {
      const auto blk = synth.synthesize(b * spb, static_cast<std::size_t>(spb), seeds.noise);
      buf.insert(buf.end(), blk.samples.begin(), blk.samples.end());
    }
    for (auto& ch : channels) {
      for (;;) {
        const std::size_t n = ch.next_length();
        if (ch.next_index() + static_cast<std::int64_t>(n) > block_end) break;
        channel::CorrelatorOutputs c;
        if (sample_mode) {
          const auto off = static_cast<std::size_t>(ch.next_index() - buf_start);
          c = channel::correlate(std::span<const std::complex<float>>(buf).subspan(off, n), sc.signal.fs, ch.nco(),
                                 ch.theta(), ch.prn(), sc.loops.spacing);
        } else {
          c = analytic[ch.index()].correlate(truth, ch.index(), ch.nco(), ch.theta(), n);
        }
        const EpochRecord& r = ch.close_epoch(c, sw.mode());
        if (observer && observer->on_epoch) observer->on_epoch(r);
      }
    }
    if (sample_mode) {
      std::int64_t keep = block_end;
      for (const auto& ch : channels) keep = std::min(keep, ch.next_index());
      if (keep - buf_start >= spb) {
        buf.erase(buf.begin(), buf.begin() + (keep - buf_start));
        buf_start = keep;
      }
    }

    const std::int64_t nb = b + 1 - lag;  // nav timeline, blocks
    if (nb <= 0) continue;
    if (nb % blocks_per_imu == 0) {
      const auto k = static_cast<std::size_t>(nb / blocks_per_imu);
      const double dt = imu[k].t - imu[k - 1].t;
      err = navfilter::ekf_propagate(err, nav, imu[k - 1], dt, sc.nav.noise, sc.earth);
      nav = navfilter::ins_mechanize(nav, imu[k - 1], imu[k], sc.earth);
      // Between nav epochs the aiding follows the inertially propagated state
      // for the channels that were locked at the last epoch.
      if (aiding && nb % blocks_per_nav != 0) publish(k);
    }

    if (nb % blocks_per_nav != 0) continue;
    // Nav epoch t_n: the nav state is at t_n and every channel has closed the
    // integration that ends nearest t_n.
    const double t_n = static_cast<double>(nb) * 1e-3;
    const std::int64_t nav_index = nb / blocks_per_nav;
    const auto k_n = static_cast<std::size_t>(nb / blocks_per_imu);
    const bool ephemeris = t_n >= sc.nav.warmup - 1e-9;

    std::vector<scenario::SatPva> sats(truth.size());
    std::vector<const EpochRecord*> recs(truth.size());
    std::vector<bool> locked(truth.size(), false);
    std::vector<navfilter::EkfMeasurement> meas;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      sats[i] = scenario::sat_pva(truth.satellite(i), t_n);
      recs[i] = channels[i].nearest(t_n);
      locked[i] = recs[i] && recs[i]->obs.has_value();
      if (!ephemeris || !locked[i]) continue;
      navfilter::EkfMeasurement m;
      m.obs = *recs[i]->obs;
      const double dt = t_n - m.obs.t_rx;
      const double fd_dot = feedback[i].valid ? feedback[i].fd_dot : 0.0;
      m.obs.rho_tilde += -m.obs.fd_tilde / kHzPerMps * dt;
      m.obs.fd_tilde += fd_dot * dt;
      m.obs.t_rx = t_n;
      m.sat = sats[i];
      const auto [sr, sf] = observation_sigmas(channels[i].cn0_estimate().value_or(40.0), sc);
      m.sigma_rho = sr;
      m.sigma_fd = sf;
      meas.push_back(m);
    }

    NavRecord nr;
    nr.t = t_n;
    if (ephemeris && !meas.empty()) {
      const auto u = navfilter::ekf_update(err, nav, meas, sc.nav.gate_sigma);
      err = u.err;
      nav = u.nav;
      nr.accepted = u.accepted;
      nr.rejected = u.rejected;
    }
    nr.locked = static_cast<int>(std::count(locked.begin(), locked.end(), true));
    nr.trace = err.P.block<6, 6>(0, 0).trace();
    nr.mode = sw.update(ephemeris ? nr.locked : 0, nr.trace, t_n);
    const auto& tru = imu_truth[k_n];
    nr.pos_err = (nav.p - tru.p_u).norm();
    nr.vel_err = (nav.v - tru.v_u).norm();
    nr.att_err = nav.q.angularDistance(tru.q);
    const double p_scale = err.P.cwiseAbs().maxCoeff();
    nr.cov_asymmetry = (err.P - err.P.transpose()).cwiseAbs().maxCoeff() / p_scale;
    nr.cov_min_eig = Eigen::SelfAdjointEigenSolver<navfilter::ErrMat>(err.P).eigenvalues().minCoeff() / p_scale;
    nr.q_norm_err = std::abs(nav.q.norm() - 1.0);
    if (!std::isfinite(nr.pos_err) || !std::isfinite(nr.vel_err) || !err.P.allFinite()) {
      throw RunAbort("navigation filter diverged", t_n, 0, "navigation filter");
    }

    if (ephemeris) {
      // Every channel is steered by the navigation solution once ephemeris is
      // valid; only observations depend on lock.
      aiding = true;
      std::fill(aided.begin(), aided.end(), true);
      publish(k_n);
    }

    const bool sample_metrics = nav_index % navs_per_metric == 0;
    const bool sample_tel = navs_per_tel > 0 && nav_index % navs_per_tel == 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const EpochRecord* r = recs[i];
      MetricSample ms;
      ms.t = t_n;
      if (r) {
        ms.locked = r->locked;
        if (r->obs) {
          ms.has_obs = true;
          ms.rho_err = r->obs->rho_tilde - truth.pseudorange(i, r->t_end);
          ms.fd_err = r->obs->fd_tilde - truth.doppler(i, r->t_end);
        }
      }
      if (sample_metrics) res.samples[i].push_back(ms);
      if (sample_tel) {
        std::optional<double> fdd;
        if (feedback[i].valid) fdd = feedback[i].fd_dot - truth.evaluate(i, t_n).fd_dot;
        tel.channel(t_n, r, truth.satellite(i).prn, ms.rho_err, ms.fd_err, channels[i].cn0_estimate(),
                    channels[i].mean_pli(), fdd);
      }
    }
    res.nav.push_back(nr);
    if (sample_tel) tel.nav(nr);
    if (observer && observer->on_nav) observer->on_nav(nr);
  }

  MetricsReport& rep = res.report;
  rep.scenario_hash = scenario_hash(sc);
  rep.architecture = rc.architecture;
  rep.fidelity = rc.fidelity;
  rep.seed = rc.seed;
  rep.switch_time = sw.switch_time();
  if (rc.architecture == Architecture::vdfll1) rep.q_fd = sc.loops.q_fd_vdfll1;
  if (rc.architecture == Architecture::vdfll2) rep.q_fd = sc.loops.q_fd_vdfll2;
  const double t_from = (rep.switch_time ? *rep.switch_time : sc.nav.warmup) + sc.metrics.convergence;
  std::vector<double> pos;
  for (const auto& n : res.nav) {
    if (n.t >= t_from) pos.push_back(n.pos_err);
  }
  rep.position_rmse = rmse(pos);
  const Vec3 site = scenario::llh_to_ecef(sc.trajectory.center);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    SatelliteMetrics s;
    s.prn = truth.satellite(i).prn;
    s.elevation_deg = elevation_deg(sc.trajectory.center, site, scenario::sat_pva(truth.satellite(i), 0.0).p);
    s.levels = bucket_levels(res.samples[i], sc.cn0, t_from);
    rep.satellites.push_back(s);
  }

  if (!rc.out_dir.empty()) {
    write_report(rep, rc.out_dir);
    write_text(rc.out_dir + "/scenario.json", to_json(sc).dump(2) + "\n");
  }
  return res;
}

}  // namespace utalfa::harness
