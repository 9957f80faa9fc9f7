#pragma once

#include <Eigen/Core>

namespace utalfa {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kL1Frequency = 1575.42e6;        // Hz
inline constexpr double kChipRate = 1.023e6;             // chips/s
inline constexpr double kCodeLength = 1023.0;            // chips
inline constexpr double kCodePeriod = kCodeLength / kChipRate;  // s
inline constexpr int kCodePeriodsPerBit = 20;
inline constexpr double kChipsPerBit = kCodeLength * kCodePeriodsPerBit;

inline constexpr double kEarthMu = 3.986004418e14;       // m^3/s^2
inline constexpr double kEarthRate = 7.2921151467e-5;    // rad/s
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;

/// Code-to-carrier frequency ratio (1/1540 for L1 C/A).
inline constexpr double kCodeCarrierRatio = kChipRate / kL1Frequency;

/// Carrier wavelength scale f_c / c, in Hz per (m/s).
inline constexpr double kHzPerMps = kL1Frequency / kSpeedOfLight;

}  // namespace utalfa
