// core.hpp - parameter types and unit conversions shared by all solvers.
//
// Internally every frequency and rate is angular (rad/s). Helpers below convert
// from the GHz / MHz / dBm values used at the interfaces.

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "kerrspec/error.hpp"

namespace kerrspec {

using cplx = std::complex<double>;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double planck = 6.62607015e-34;     // J s
inline constexpr double e_charge = 1.602176634e-19;  // C
inline constexpr double flux_quantum = planck / (2.0 * e_charge); // Wb
inline constexpr double c_light = 299792458.0;       // m/s
inline constexpr double two_pi = 2.0 * std::numbers::pi;
} // namespace constants

inline constexpr double ghz(double v) { return constants::two_pi * v * 1e9; }
inline constexpr double mhz(double v) { return constants::two_pi * v * 1e6; }
inline constexpr double to_hz(double omega) { return omega / constants::two_pi; }
inline constexpr double to_mhz(double omega) { return omega / constants::two_pi * 1e-6; }
inline constexpr double to_ghz(double omega) { return omega / constants::two_pi * 1e-9; }

/// Working point of the resonator. `kerr` is signed; this device has kerr < 0.
struct DeviceParams {
    double omega_r{0.0};
    double kerr{0.0};
    double kappa_e{0.0};
    double kappa_i{0.0};

    double kappa_tot() const noexcept { return kappa_e + kappa_i; }

    void validate() const {
        if (!(omega_r > 0.0) || !std::isfinite(omega_r))
            throw InvalidParameter("omega_r must be positive and finite");
        if (!std::isfinite(kerr))
            throw InvalidParameter("kerr must be finite");
        if (!(kappa_e >= 0.0) || !(kappa_i >= 0.0))
            throw InvalidParameter("kappa_e and kappa_i must be non-negative");
        if (!(kappa_tot() > 0.0) || !std::isfinite(kappa_tot()))
            throw InvalidParameter("kappa_e + kappa_i must be positive");
    }

    /// Build from frequencies in GHz / MHz (ordinary, not angular).
    static DeviceParams from_lab(double f_r_ghz, double kerr_mhz, double kappa_e_mhz, double kappa_i_mhz) {
        return DeviceParams{ghz(f_r_ghz), mhz(kerr_mhz), mhz(kappa_e_mhz), mhz(kappa_i_mhz)};
    }
};

/// A coherent input tone at the device port.
struct ToneSpec {
    double omega{0.0};
    double power_dbm{-std::numeric_limits<double>::infinity()};
    double phase{0.0};
};

/// Reduced flux f = Phi_ex / Phi_0. Flux-dependent quantities are even and 1-periodic in f.
struct FluxBias {
    double f{0.0};

    /// Representative in [0, 0.5] with the same physics.
    double reduced() const noexcept {
        double r = f - std::floor(f);
        return r > 0.5 ? 1.0 - r : r;
    }
};

inline double dbm_to_watts(double p_dbm) {
    return std::pow(10.0, (p_dbm - 30.0) / 10.0);
}

inline double watts_to_dbm(double watts) {
    return 10.0 * std::log10(watts) + 30.0;
}

/// Complex input amplitude E with |E|^2 = P / (hbar omega), in sqrt(photons/s).
inline cplx tone_amplitude(const ToneSpec& t) {
    if (!(t.omega > 0.0) || !std::isfinite(t.omega))
        throw InvalidParameter("tone frequency must be positive");
    const double watts = dbm_to_watts(t.power_dbm);
    const double mag = std::sqrt(watts / (constants::hbar * t.omega));
    return std::polar(mag, t.phase);
}

/// Inverse of tone_amplitude's magnitude: power in dBm carried by amplitude |E| at omega.
inline double amplitude_to_dbm(double magnitude, double omega) {
    return watts_to_dbm(magnitude * magnitude * constants::hbar * omega);
}

/// Reflection of the linear (K = 0) resonator:
/// Gamma = (D + i(ki - ke)/2) / (D + i(ki + ke)/2), D = omega_p - omega_r.
inline cplx linear_reflection(const DeviceParams& d, double omega_p) {
    const double det = omega_p - d.omega_r;
    const cplx num(det, 0.5 * (d.kappa_i - d.kappa_e));
    const cplx den(det, 0.5 * d.kappa_tot());
    return num / den;
}

/// Photons stored in the resonator for output power P_o leaking through the external port.
inline double photons_from_output_power(double p_dbm, double omega_r, double kappa_e) {
    return dbm_to_watts(p_dbm) / (constants::hbar * omega_r * kappa_e);
}

/// Photons built up on resonance by an injected tone: 4 P kappa_e / (hbar omega_r kappa_tot^2).
inline double photons_from_input_power(double p_dbm, double omega_r, double kappa_e, double kappa_tot) {
    return 4.0 * dbm_to_watts(p_dbm) * kappa_e / (constants::hbar * omega_r * kappa_tot * kappa_tot);
}

} // namespace kerrspec
