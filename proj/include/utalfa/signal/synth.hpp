#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "utalfa/signal/prn.hpp"
#include "utalfa/signal/truth.hpp"

namespace utalfa::signal {

/// One contiguous run of complex baseband samples. When `quantized` is set
/// every component is an integer in [-128, 127].
struct IfBlock {
  double t_start = 0;
  double fs = 0;
  std::vector<std::complex<float>> samples;
  bool quantized = true;

  double duration() const { return static_cast<double>(samples.size()) / fs; }
};

struct SynthOptions {
  double fs = 4.0e6;
  double noise_sigma = 1.0;  // per-component analog noise sigma
  bool noise = true;
  bool quantize = true;
  /// Overrides the automatic AGC gain when > 0.
  double agc_scale = 0;
};

/// Per-sample amplitude for a C/N0, with complex noise of variance
/// 2*sigma^2 spread over fs:  A^2 / (2 sigma^2 / fs) = C/N0.
inline double amplitude_for_cn0(double cn0_dbhz, double noise_sigma, double fs) {
  return noise_sigma * std::sqrt(2.0 * std::pow(10.0, cn0_dbhz / 10.0) / fs);
}

/// Samples the truth into 8-bit I/Q. Within each 1 ms grid cell the code
/// delay and carrier phase are expanded to second order around the cell start,
/// so every sample is a deterministic function of its timestamp.
class SignalSynthesizer {
 public:
  static constexpr double kGrid = 1e-3;

  SignalSynthesizer(const SignalTruth& truth, SynthOptions opt) : truth_(truth), opt_(opt) {
    if (!(opt_.fs > 0)) throw std::invalid_argument("synthesizer: fs must be positive");
    double sig_power = 0;
    const double peak = truth_.size() ? truth_.schedule().max_dbhz() : 0.0;
    for (std::size_t i = 0; i < truth_.size(); ++i) {
      const double a = amplitude_for_cn0(peak, opt_.noise_sigma, opt_.fs);
      sig_power += 0.5 * a * a;
    }
    const double sigma_analog = std::sqrt(opt_.noise_sigma * opt_.noise_sigma + sig_power);
    // +/-4 sigma of the analog signal spans the 8-bit range.
    scale_ = opt_.agc_scale > 0 ? opt_.agc_scale : 127.0 / (4.0 * sigma_analog);
  }

  double agc_scale() const { return scale_; }
  const SynthOptions& options() const { return opt_; }
  const SignalTruth& truth() const { return truth_; }

  /// Samples n with timestamps (first_index + n) / fs.
  IfBlock synthesize(std::int64_t first_index, std::size_t count, std::uint64_t seed) const {
    IfBlock blk;
    blk.fs = opt_.fs;
    blk.t_start = static_cast<double>(first_index) / opt_.fs;
    blk.quantized = opt_.quantize;
    std::vector<std::complex<double>> acc(count, {0.0, 0.0});

    for (std::size_t i = 0; i < truth_.size(); ++i) add_satellite(i, first_index, acc);

    if (opt_.noise) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(first_index))));
      std::normal_distribution<double> n01(0.0, opt_.noise_sigma);
      for (auto& x : acc) x += std::complex<double>(n01(rng), n01(rng));
    }

    blk.samples.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
      double re = acc[n].real() * scale_, im = acc[n].imag() * scale_;
      if (opt_.quantize) {
        re = std::clamp(std::nearbyint(re), -128.0, 127.0);
        im = std::clamp(std::nearbyint(im), -128.0, 127.0);
      }
      blk.samples[n] = {static_cast<float>(re), static_cast<float>(im)};
    }
    return blk;
  }

  IfBlock synthesize_block(double t_start, double duration, std::uint64_t seed) const {
    const double n0 = t_start * opt_.fs;
    const double nn = duration * opt_.fs;
    if (std::abs(nn - std::round(nn)) > 1e-6 || std::abs(n0 - std::round(n0)) > 1e-6) {
      throw std::invalid_argument("synthesize_block: t_start and duration must be multiples of 1/fs");
    }
    return synthesize(std::llround(n0), static_cast<std::size_t>(std::llround(nn)), seed);
  }

 private:
  void add_satellite(std::size_t i, std::int64_t first_index,
                     std::vector<std::complex<double>>& acc) const {
    const auto& code = prn_code(truth_.satellite(i).prn);
    const double fs = opt_.fs;
    const std::int64_t end_index = first_index + static_cast<std::int64_t>(acc.size());
    std::int64_t n = first_index;
    while (n < end_index) {
      const double t = static_cast<double>(n) / fs;
      const double tg = std::floor(t / kGrid + 1e-9) * kGrid;
      const std::int64_t cell_end =
          std::min<std::int64_t>(end_index, static_cast<std::int64_t>(std::ceil((tg + kGrid) * fs - 1e-9)));
      const SatSignalState s = truth_.evaluate(i, tg);
      const double amp = amplitude_for_cn0(s.cn0, opt_.noise_sigma, fs);

      const double code_rate = kChipRate * (1.0 - s.tau_dot);
      const double code_acc = -0.5 * kChipRate * s.tau_ddot;
      const double car_rate = -kL1Frequency * s.tau_dot;
      const double car_acc = -0.5 * kL1Frequency * s.tau_ddot;

      // chips relative to the bit that contains the cell start
      const double bit_base = std::floor(s.code_chips / kChipsPerBit) * kChipsPerBit;
      const double chips0 = s.code_chips - bit_base;
      int bit = truth_.nav_bit(i, bit_base + 1.0);
      int next_bit = truth_.nav_bit(i, bit_base + kChipsPerBit + 1.0);
      int prev_bit = truth_.nav_bit(i, bit_base - 1.0);

      const double s0 = t - tg;
      const double ph0 = s.phi - std::floor(s.phi) + car_rate * s0 + car_acc * s0 * s0;
      std::complex<double> z = std::polar(1.0, kTwoPi * ph0);
      const double dt = 1.0 / fs;
      // phase increment between consecutive samples is linear in the index
      std::complex<double> w = std::polar(1.0, kTwoPi * (car_rate * dt + car_acc * (2 * s0 * dt + dt * dt)));
      const std::complex<double> r = std::polar(1.0, kTwoPi * 2.0 * car_acc * dt * dt);

      for (std::int64_t k = n; k < cell_end; ++k) {
        const double sk = static_cast<double>(k) / fs - tg;
        const double chips = chips0 + code_rate * sk + code_acc * sk * sk;
        int b = bit;
        if (chips >= kChipsPerBit) b = next_bit;
        else if (chips < 0) b = prev_bit;
        double c = std::fmod(chips, kCodeLength);
        if (c < 0) c += kCodeLength;
        const double chip_val = code[static_cast<std::size_t>(c)];
        acc[static_cast<std::size_t>(k - first_index)] += (amp * b * chip_val) * z;
        z *= w;
        w *= r;
      }
      n = cell_end;
    }
  }

  const SignalTruth& truth_;
  SynthOptions opt_;
  double scale_ = 1.0;
};

}  // namespace utalfa::signal
