#pragma once

#include <numbers>

namespace hgcav {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact
inline constexpr double kGravity = 9.81;              // m/s^2
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Internal units are SI with angular frequencies in rad/s. The helpers below
// are for I/O boundaries only.
constexpr double mhz_to_rad_s(double mhz) { return kTwoPi * 1e6 * mhz; }
constexpr double rad_s_to_mhz(double w) { return w / (kTwoPi * 1e6); }
constexpr double hz_to_rad_s(double hz) { return kTwoPi * hz; }
constexpr double rad_s_to_hz(double w) { return w / kTwoPi; }

}  // namespace hgcav
