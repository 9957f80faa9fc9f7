#pragma once

#include <array>
#include <vector>

#include "utalfa/scenario/orbit.hpp"

namespace utalfa::scenario {

struct LookAngle {
  int prn;
  double azimuth_deg;
  double elevation_deg;
};

/// Eight satellites spread in azimuth, two of them below 25 degrees.
inline constexpr std::array<LookAngle, 8> kDefaultSky = {{{2, 40, 62},
                                                          {6, 95, 45},
                                                          {12, 160, 35},
                                                          {17, 215, 71},
                                                          {19, 265, 28.5},
                                                          {24, 310, 52},
                                                          {25, 350, 18},
                                                          {29, 130, 11}}};

/// Satellites whose orbits pass through the given look angles from `user` at
/// t = 0. Clock terms are small deterministic offsets per PRN.
template <class Sky = decltype(kDefaultSky)>
std::vector<SatelliteTruth> constellation(const Vec3& user, const Sky& sky = kDefaultSky) {
  std::vector<SatelliteTruth> out;
  bool ascending = true;
  for (const auto& l : sky) {
    SatelliteTruth s;
    s.prn = l.prn;
    s.orbit = orbit_through_look_angle(user, l.azimuth_deg * kPi / 180.0, l.elevation_deg * kPi / 180.0,
                                       26'560'000.0, 55.0 * kPi / 180.0, ascending);
    s.clock_bias = 1000.0 * ((l.prn % 7) - 3);
    s.clock_drift = 0.01 * ((l.prn % 5) - 2);
    out.push_back(s);
    ascending = !ascending;
  }
  return out;
}

}  // namespace utalfa::scenario
