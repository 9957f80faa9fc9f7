#pragma once

#include <cmath>
#include <optional>

#include "utalfa/channel/correlator.hpp"

namespace utalfa::channel {

struct DiscriminatorOutputs {
  double d_tau = 0;  // chips, incoming minus replica code phase
  double d_phi = 0;  // cycles, (-0.25, 0.25]
  double d_fd = 0;   // Hz
  bool valid_tau = false;
  bool valid_phi = false;
  bool valid_fd = false;
};

/// Normalized non-coherent early-minus-late power. The (2 - d)/4 factor gives
/// unit slope at the origin for a triangular autocorrelation.
inline std::optional<double> dll_disc(const CorrelatorOutputs& c, double spacing) {
  const double e = c.early_power();
  const double l = c.late_power();
  if (!(e + l > 0)) return std::nullopt;
  return 0.25 * (2.0 - spacing) * (e - l) / (e + l);
}

/// Two-quadrant Costas arctangent, insensitive to data-bit sign.
inline std::optional<double> pll_disc(const CorrelatorOutputs& c) {
  if (c.IP == 0 && c.QP == 0) return std::nullopt;
  if (c.IP == 0) return 0.25;
  const double x = std::atan(c.QP / c.IP) / kTwoPi;
  return x <= -0.25 ? 0.25 : x;
}

/// Cross/dot four-quadrant frequency discriminator over two consecutive
/// prompts integrated within one data bit.
inline std::optional<double> fll_disc(const CorrelatorOutputs& prev, const CorrelatorOutputs& curr) {
  const double cross = prev.IP * curr.QP - curr.IP * prev.QP;
  const double dot = prev.IP * curr.IP + prev.QP * curr.QP;
  if (cross == 0 && dot == 0) return std::nullopt;
  const double T = curr.T_I > 0 ? curr.T_I : prev.T_I;
  if (!(T > 0)) return std::nullopt;
  return std::atan2(cross, dot) / (kTwoPi * T);
}

}  // namespace utalfa::channel
