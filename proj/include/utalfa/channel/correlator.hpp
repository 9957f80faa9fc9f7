#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "utalfa/channel/nco.hpp"
#include "utalfa/signal/prn.hpp"
#include "utalfa/signal/synth.hpp"

namespace utalfa::channel {

struct CorrelatorOutputs {
  double IE = 0, QE = 0;
  double IP = 0, QP = 0;
  double IL = 0, QL = 0;
  double T_I = 0;
  std::size_t n_samples = 0;

  double early_power() const { return IE * IE + QE * QE; }
  double prompt_power() const { return IP * IP + QP * QP; }
  double late_power() const { return IL * IL + QL * QL; }
};

namespace detail {

// Exact for the few periods one integration spans.
inline double wrap_code(double c) {
  while (c >= kCodeLength) c -= kCodeLength;
  while (c < 0) c += kCodeLength;
  return c;
}

}  // namespace detail

/// Early/prompt/late correlation of `samples` (timestamps t_rx + n/fs) against
/// the replica code(tau +/- d/2) * exp(-j 2 pi phi). The replica phases move at
/// the rates set by `theta`, exactly as nco_advance would move them.
inline CorrelatorOutputs correlate(std::span<const std::complex<float>> samples, double fs,
                                   const ChannelNcoState& state, const loops::ControlParams& theta, int prn,
                                   double spacing) {
  if (!(spacing > 0 && spacing <= 1.0)) throw std::invalid_argument("correlate: spacing must be in (0, 1]");
  const auto& code = signal::prn_code(prn);
  const double f_code = kChipRate + theta.f_dll;
  const double code_step = f_code / fs;
  const double half = 0.5 * spacing;

  const std::complex<double> rot = std::polar(1.0, -kTwoPi * theta.f_pll / fs);
  std::complex<double> lo = std::polar(1.0, -kTwoPi * state.phi_nco);

  double ie = 0, qe = 0, ip = 0, qp = 0, il = 0, ql = 0;
  const std::size_t n = samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double chip = state.tau_nco + static_cast<double>(k) * code_step;
    const double ce = code[static_cast<std::size_t>(detail::wrap_code(chip + half))];
    const double cp = code[static_cast<std::size_t>(detail::wrap_code(chip))];
    const double cl = code[static_cast<std::size_t>(detail::wrap_code(chip - half))];
    const std::complex<double> x(samples[k].real(), samples[k].imag());
    const std::complex<double> y = x * lo;
    ie += ce * y.real();
    qe += ce * y.imag();
    ip += cp * y.real();
    qp += cp * y.imag();
    il += cl * y.real();
    ql += cl * y.imag();
    lo *= rot;
    if ((k & 1023u) == 1023u) lo /= std::abs(lo);
  }
  CorrelatorOutputs out{ie, qe, ip, qp, il, ql, static_cast<double>(n) / fs, n};
  return out;
}

/// Block form: integrates `count` samples of `block` starting at the sample
/// whose timestamp equals state.t_rx.
inline CorrelatorOutputs correlate(const signal::IfBlock& block, const ChannelNcoState& state,
                                   const loops::ControlParams& theta, int prn, double spacing,
                                   std::size_t count) {
  const double offset = (state.t_rx - block.t_start) * block.fs;
  const double idx = std::round(offset);
  if (std::abs(offset - idx) > 1e-3 || idx < 0 ||
      static_cast<std::size_t>(idx) + count > block.samples.size()) {
    throw std::invalid_argument("correlate: block does not cover the integration interval");
  }
  return correlate(std::span(block.samples).subspan(static_cast<std::size_t>(idx), count), block.fs, state, theta,
                   prn, spacing);
}

}  // namespace utalfa::channel
