#pragma once

namespace qbmaser {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// SI exact values
inline constexpr double planck_h = 6.62607015e-34;   // J s
inline constexpr double hbar = planck_h / two_pi;    // J s
inline constexpr double boltzmann_kb = 1.380649e-23; // J / K

}  // namespace qbmaser
