#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>

#include "utalfa/channel/cn0.hpp"
#include "utalfa/channel/correlator.hpp"
#include "utalfa/channel/discriminators.hpp"
#include "utalfa/harness/config.hpp"
#include "utalfa/harness/lock.hpp"
#include "utalfa/loops/alfa.hpp"
#include "utalfa/loops/kf.hpp"
#include "utalfa/loops/og_cpg.hpp"
#include "utalfa/navfilter/ekf.hpp"
#include "utalfa/signal/synth.hpp"

namespace utalfa::harness {

/// Raised when a run cannot continue; carries where and why.
struct RunAbort : std::runtime_error {
  RunAbort(const std::string& what, double t_, int prn_, std::string stage_)
      : std::runtime_error(what), t(t_), prn(prn_), stage(std::move(stage_)) {}
  double t;
  int prn;
  std::string stage;
};

/// What one channel produced over one integration.
struct EpochRecord {
  int prn = 0;
  double t_start = 0;  // replica receive time at the start of the integration
  double t_end = 0;
  std::int64_t start_index = 0;
  std::size_t n_samples = 0;
  bool bit_start = false;
  channel::CorrelatorOutputs corr;
  channel::DiscriminatorOutputs disc;
  loops::ControlParams theta_applied;  // in force during the integration
  loops::ControlParams theta_next;
  std::optional<loops::ChannelObservation> obs;
  double fd_estimate = 0;
  bool locked = false;
  bool stale = false;
  navfilter::Mode mode = navfilter::Mode::STL;
};

/// Noise-free early/prompt/late correlation of the truth against a replica
/// that evolves linearly over the integration, evaluated at its midpoint,
/// plus jointly Gaussian correlator noise of the matching covariance.
class AnalyticCorrelator {
 public:
  AnalyticCorrelator(double fs, double noise_sigma, double spacing, std::uint64_t seed)
      : fs_(fs), sigma_(noise_sigma), spacing_(spacing), rng_(seed) {
    const double r1 = 1.0 - 0.5 * spacing, r2 = 1.0 - spacing;
    Eigen::Matrix3d C;
    C << 1.0, r1, r2, r1, 1.0, r1, r2, r1, 1.0;
    L_ = C.llt().matrixL();
  }

  channel::CorrelatorOutputs correlate(const signal::SignalTruth& truth, std::size_t i,
                                       const channel::ChannelNcoState& nco, const loops::ControlParams& theta,
                                       std::size_t n) {
    const double T = static_cast<double>(n) / fs_;
    const double t_mid = nco.t_rx + 0.5 * T;
    const signal::SatSignalState s = truth.evaluate(i, t_mid);
    const double chips_rep = nco.total_chips() + (kChipRate + theta.f_dll) * 0.5 * T;
    const double cycles_rep = nco.total_cycles() + theta.f_pll * 0.5 * T;
    const double dtau = s.code_chips - chips_rep;
    const double dphi = s.phi - cycles_rep;
    const double dfd = s.fd - theta.f_pll;
    const double x = kPi * dfd * T;
    const double sinc = std::abs(x) < 1e-9 ? 1.0 : std::sin(x) / x;
    const double amp = signal::amplitude_for_cn0(s.cn0, sigma_, fs_) * static_cast<double>(n) * s.nav_bit * sinc;
    const double frac = dphi - std::floor(dphi);
    const std::complex<double> c = std::polar(amp, kTwoPi * frac);
    auto R = [](double d) { return std::max(0.0, 1.0 - std::abs(d)); };
    const double h = 0.5 * spacing_;
    const std::complex<double> e = c * R(dtau - h), p = c * R(dtau), l = c * R(dtau + h);

    const double sn = sigma_ * std::sqrt(static_cast<double>(n));
    Eigen::Vector3d wi, wq;
    for (int k = 0; k < 3; ++k) wi(k) = n01_(rng_);
    for (int k = 0; k < 3; ++k) wq(k) = n01_(rng_);
    const Eigen::Vector3d ni = sn * (L_ * wi), nq = sn * (L_ * wq);
    channel::CorrelatorOutputs out;
    out.IE = e.real() + ni(0);
    out.QE = e.imag() + nq(0);
    out.IP = p.real() + ni(1);
    out.QP = p.imag() + nq(1);
    out.IL = l.real() + ni(2);
    out.QL = l.imag() + nq(2);
    out.T_I = T;
    out.n_samples = n;
    return out;
  }

 private:
  double fs_, sigma_, spacing_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> n01_{0.0, 1.0};
  Eigen::Matrix3d L_;
};

/// Per-satellite tracking state and the loop logic shared by both fidelities.
class ChannelRuntime {
 public:
  ChannelRuntime(const ScenarioConfig& cfg, Architecture arch, const signal::SignalTruth& truth, std::size_t index,
                 std::uint64_t seed)
      : cfg_(cfg), arch_(arch), index_(index), prn_(truth.satellite(index).prn), lock_(cfg.lock),
        periods_(static_cast<int>(std::lround(cfg.loops.T_I / kCodePeriod))),
        cn0_(cfg.loops.T_I, kCodePeriodsPerBit / periods_, 50) {
    const double fs = cfg.signal.fs;
    std::mt19937_64 rng(signal::splitmix64(seed ^ (0xA5A5ull + static_cast<std::uint64_t>(prn_))));
    std::uniform_real_distribution<double> u11(-1.0, 1.0), u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);

    // Start on the first replica code wrap after t = 0, rounded to a sample.
    auto chips_at = [&](double t) { return truth.evaluate(index, t).code_chips; };
    const double k = std::ceil(chips_at(0.0) / kCodeLength);
    double t_w = 0;
    for (int it = 0; it < 8; ++it) {
      const auto s = truth.evaluate(index, t_w);
      t_w += (k * kCodeLength - s.code_chips) / (kChipRate * (1.0 - s.tau_dot));
    }
    next_index_ = static_cast<std::int64_t>(std::ceil(t_w * fs - 1e-6));
    const double t0 = static_cast<double>(next_index_) / fs;
    const auto s0 = truth.evaluate(index, t0);

    nco_.t_rx = t0;
    nco_.set_code_phase(s0.code_chips - cfg.loops.init_code_error * u11(rng));
    nco_.set_carrier_phase(s0.phi + u01(rng));
    theta_.f_pll = s0.fd + cfg.loops.init_doppler_error * n01(rng);
    theta_.f_dll = kCodeCarrierRatio * theta_.f_pll;
    nco_.f_carr = theta_.f_pll;
    nco_.f_code = kChipRate + theta_.f_dll;

    filt_.gains = loops::gains_from_bandwidth(cfg.loops.b_pll_stl, cfg.loops.b_dll, cfg.loops.T_I);
    filt_.T = cfg.loops.T_I;
    gains_bw_ = cfg.loops.b_pll_stl;
    filt_.acc = theta_.f_pll;
    acc_applied_ = filt_.acc;
    fd_est_ = theta_.f_pll;

    kf_.x.setZero();
    const double sd = std::max(cfg.loops.init_doppler_error, 1.0);
    kf_.P = Eigen::Vector3d(0.1 * 0.1, 0.25 * 0.25, sd * sd).asDiagonal();
    const double q_fd = arch == Architecture::vdfll2 ? cfg.loops.q_fd_vdfll2 : cfg.loops.q_fd_vdfll1;
    kf_.Q = Eigen::Vector3d(cfg.loops.q_tau, cfg.loops.q_phi, q_fd).asDiagonal();
    set_kf_noise(40.0);
  }

  int prn() const { return prn_; }
  std::size_t index() const { return index_; }
  std::int64_t next_index() const { return next_index_; }
  const channel::ChannelNcoState& nco() const { return nco_; }
  const loops::ControlParams& theta() const { return theta_; }
  bool locked() const { return lock_.locked(); }
  std::optional<double> cn0_estimate() const { return cn0_.estimate(); }
  std::optional<double> mean_pli() const { return cn0_.mean_pli(pli_blocks()); }
  const std::deque<EpochRecord>& recent() const { return recent_; }
  void set_feedback(const loops::ChannelFeedback& fb) { fb_ = fb; }

  /// Samples covered by the next integration: up to the next replica code
  /// wrap whose period count is a multiple of the periods per integration,
  /// skipping one that is less than half a code period away.
  std::size_t next_length() const {
    const double step = (kChipRate + theta_.f_dll) / cfg_.signal.fs;
    const auto rem = ((nco_.code_periods % periods_) + periods_) % periods_;
    double to_go = static_cast<double>(periods_ - rem) * kCodeLength - nco_.tau_nco;
    if (to_go < 0.5 * kCodeLength) to_go += static_cast<double>(periods_) * kCodeLength;
    return static_cast<std::size_t>(std::ceil(to_go / step));
  }

  /// Closes one integration with correlator outputs `c` and advances the
  /// replica. `mode` is the navigation mode in force.
  const EpochRecord& close_epoch(const channel::CorrelatorOutputs& c, navfilter::Mode mode) {
    EpochRecord r;
    r.prn = prn_;
    r.t_start = nco_.t_rx;
    r.start_index = next_index_;
    r.n_samples = c.n_samples;
    r.corr = c;
    r.mode = mode;
    r.theta_applied = theta_;
    const double step = (kChipRate + theta_.f_dll) / cfg_.signal.fs;
    const auto cp = ((nco_.code_periods % kCodePeriodsPerBit) + kCodePeriodsPerBit) % kCodePeriodsPerBit;
    r.bit_start = cp == 0 && nco_.tau_nco < step;

    auto& d = r.disc;
    if (auto v = channel::dll_disc(c, cfg_.loops.spacing)) {
      d.d_tau = *v;
      d.valid_tau = true;
    }
    if (auto v = channel::pll_disc(c)) {
      d.d_phi = *v;
      d.valid_phi = true;
    }
    if (prev_ && !r.bit_start) {
      if (auto v = channel::fll_disc(*prev_, c)) {
        d.d_fd = *v;
        d.valid_fd = true;
      }
    }
    prev_ = c;

    if (r.bit_start) synced_ = true;
    if (synced_ && cn0_.push(c.IP, c.QP, r.bit_start)) {
      lock_.update(cn0_.estimate(), cn0_.mean_pli(pli_blocks()), nco_.t_rx);
      if (auto e = cn0_.estimate()) set_kf_noise(*e);
    }

    const double t_now = nco_.t_rx;
    loops::ControlParams next = theta_;
    double d_tau_hat = 0;
    if (is_vdfll(arch_)) {
      next = vdfll_step(d, mode, t_now + c.T_I, r.stale, d_tau_hat);
    } else if (arch_ == Architecture::alfa && mode == navfilter::Mode::VTL) {
      set_gains(cfg_.loops.b_pll_alfa);
      const double age = fb_.valid ? t_now + c.T_I - fb_.t : std::numeric_limits<double>::infinity();
      const auto s = loops::alfa_update(filt_, d.valid_tau ? d.d_tau : 0.0, d.valid_phi ? d.d_phi : 0.0, fb_.fd_dot,
                                        age, cfg_.loops.staleness);
      next = s.theta;
      fd_est_ = 0.5 * (acc_applied_ + filt_.acc);
      acc_applied_ = filt_.acc;
      filt_ = s.state;
      r.stale = s.stale;
    } else {
      set_gains(cfg_.loops.b_pll_stl);
      auto [u, s] = loops::stl_update(filt_, d, cfg_.loops.K_f);
      next = u;
      fd_est_ = 0.5 * (acc_applied_ + filt_.acc);
      acc_applied_ = filt_.acc;
      filt_ = s;
    }

    nco_ = channel::nco_advance(nco_, theta_, c.T_I);
    next_index_ += static_cast<std::int64_t>(c.n_samples);
    nco_.t_rx = static_cast<double>(next_index_) / cfg_.signal.fs;

    if (!next.sane()) {
      throw RunAbort("non-finite or out-of-range NCO command", nco_.t_rx, prn_, "loop filter");
    }
    theta_ = next;
    r.theta_next = next;
    r.t_end = nco_.t_rx;
    r.fd_estimate = fd_est_;
    r.locked = lock_.locked();
    r.obs = loops::og_generate(fd_est_, nco_, prn_, r.locked, d_tau_hat);

    recent_.push_back(r);
    if (recent_.size() > 4) recent_.pop_front();
    return recent_.back();
  }

  /// The most recent observation-bearing epoch end nearest `t`, if within
  /// half an integration of it.
  const EpochRecord* nearest(double t) const {
    const EpochRecord* best = nullptr;
    for (const auto& r : recent_) {
      if (!best || std::abs(r.t_end - t) < std::abs(best->t_end - t)) best = &r;
    }
    if (!best || std::abs(best->t_end - t) > 0.5 * cfg_.loops.T_I + 0.5 / cfg_.signal.fs) return nullptr;
    return best;
  }

 private:
  std::size_t pli_blocks() const {
    const auto n = std::llround(cfg_.lock.window / (kCodePeriodsPerBit * kCodePeriod));
    return static_cast<std::size_t>(std::max<long long>(n, 1));
  }

  void set_gains(double b_pll) {
    if (b_pll != gains_bw_) {
      filt_.gains = loops::gains_from_bandwidth(b_pll, cfg_.loops.b_dll, cfg_.loops.T_I);
      gains_bw_ = b_pll;
    }
  }

  void set_kf_noise(double cn0) {
    const auto v = loops::variance_from_cn0(cn0);
    kf_.R = Eigen::Vector3d(v.tau, v.phi, v.fd).asDiagonal();
  }

  loops::ControlParams vdfll_step(const channel::DiscriminatorOutputs& d, navfilter::Mode mode, double t_end,
                                  bool& stale, double& d_tau_hat) {
    const double T = cfg_.loops.T_I;
    const double alpha = kCodeCarrierRatio;
    constexpr double kUninformative = 1e12;
    loops::KfChannelState s = kf_;
    Eigen::Vector3d z(d.d_tau, d.d_phi, d.d_fd);
    if (!d.valid_tau) s.R(0, 0) = kUninformative;
    if (!d.valid_phi) s.R(1, 1) = kUninformative;
    if (!d.valid_fd) s.R(2, 2) = kUninformative;
    const loops::KfCorrection c = loops::kf_correct(loops::kf_predict(s, theta_, T, alpha), z);
    kf_.x = c.state.x;
    kf_.P = c.state.P;
    const Eigen::Vector3d& x = kf_.x;
    d_tau_hat = x(0);

    loops::ControlParams next;
    double predicted = 0;  // Doppler change over one epoch predicted by the navigation solution
    if (mode == navfilter::Mode::VTL) {
      const auto at_end = channel::nco_advance(nco_, theta_, t_end - nco_.t_rx);
      const loops::CpgParams p{cfg_.loops.K_cpg, T, cfg_.loops.staleness};
      const loops::CpgStep g = loops::cpg(fb_, at_end, p, vtl_prev_);
      stale = g.stale;
      if (!g.stale) predicted = fb_.fd_dot * T;
      vtl_prev_ = g.theta;
      next.f_pll = g.theta.f_pll + cfg_.loops.vtl_carrier_phase_gain * x(1) / T;
      next.f_dll = g.theta.f_dll + (cfg_.loops.vdfll_code_dtau ? x(0) / T : 0.0);
    } else {
      next.f_pll = theta_.f_pll + x(2) + x(1) / T;
      next.f_dll = kCodeCarrierRatio * next.f_pll + x(0) / T;
      vtl_prev_ = next;
    }
    // The Doppler state is the signal minus the command: it moves against the
    // command change and, in VTL, with the predicted signal change.
    // The estimate averages the closed epoch; half the predicted change moves it to the end.
    fd_est_ = theta_.f_pll + x(2) + 0.5 * predicted;
    kf_.x(2) += theta_.f_pll - next.f_pll + predicted;
    return next;
  }

  const ScenarioConfig& cfg_;
  Architecture arch_;
  std::size_t index_;
  int prn_;
  int periods_;  // code periods per integration
  LockDetector lock_;
  channel::Cn0Estimator cn0_;
  channel::ChannelNcoState nco_;
  loops::ControlParams theta_;
  loops::ControlParams vtl_prev_;
  loops::AlfaFilterState filt_;
  double gains_bw_ = 0;
  loops::KfChannelState kf_;
  loops::ChannelFeedback fb_;
  std::optional<channel::CorrelatorOutputs> prev_;
  std::deque<EpochRecord> recent_;
  std::int64_t next_index_ = 0;
  double fd_est_ = 0;
  double acc_applied_ = 0;  // integrator behind the carrier command of the closed epoch
  bool synced_ = false;
};

}  // namespace utalfa::harness
