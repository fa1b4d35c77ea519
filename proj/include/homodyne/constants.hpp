#pragma once

namespace homodyne {

// 2019 SI exact values.
inline constexpr double kElectronCharge = 1.602176634e-19;  // C
inline constexpr double kPlanck        = 6.62607015e-34;    // J s
inline constexpr double kSpeedOfLight  = 299792458.0;       // m/s
inline constexpr double kPi            = 3.14159265358979323846;

/// Photon energy hc/lambda in joules.
inline double photon_energy(double wavelength_m) {
    return kPlanck * kSpeedOfLight / wavelength_m;
}

/// Unity-quantum-efficiency responsivity lambda*q/(h*c) in A/W.
inline double ideal_responsivity(double wavelength_m) {
    return kElectronCharge / photon_energy(wavelength_m);
}

}  // namespace homodyne
