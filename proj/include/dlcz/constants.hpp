#pragma once

#include <numbers>

// Physical constants and apparatus defaults. SI units throughout.
namespace dlcz::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Boltzmann constant [J/K] (exact, SI 2019).
inline constexpr double kBoltzmann = 1.380649e-23;
/// Atomic mass unit [kg] (CODATA 2018).
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;
/// 87Rb atomic mass [kg].
inline constexpr double kRb87Mass = 86.909180531 * kAtomicMassUnit;
/// 87Rb D2 line vacuum wavelength [m].
inline constexpr double kRbD2Wavelength = 780.241209686e-9;
/// Bohr magneton over h [Hz/T]; times 2*pi gives the angular Zeeman scale
/// for a g_F * delta(m_F) = 1 coherence.
inline constexpr double kBohrMagnetonOverH = 13.996245042e9;
inline constexpr double kDefaultZeemanCoefficient = kTwoPi * kBohrMagnetonOverH;

/// Angle between the write/read pulse axis and the photon detection axis [rad].
inline constexpr double kDefaultCrossingAngle = 0.95 * kPi / 180.0;

/// Write/read photon filter chain (cavity + fibre coupling) transmission.
inline constexpr double kDefaultFilterTransmission = 0.20;
/// Single photon detector efficiency.
inline constexpr double kDefaultSpdEfficiency = 0.43;

}  // namespace dlcz::constants
