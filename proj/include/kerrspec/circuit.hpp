// circuit.hpp - flux dependence of the resonance frequency and Kerr coefficient of a
// half-wave CPW resonator interrupted by a symmetric dc-SQUID.
//
// The chain, from the feed side, is: shunt C_in | line l1 | series (L_s || C_j) | line l2 |
// shunt C_shunt. The feed line impedance is small next to 1/(omega C_in) and is replaced
// by ground, so C_in acts as a capacitor to ground. A mode exists where the ABCD element C
// of the chain vanishes (current-free terminals on both sides).
//
// The Kerr coefficient is the lowest-order quartic term of the SQUID potential,
//   hbar K = -p^2 (hbar omega_r)^2 / (8 E_J),  E_J = (Phi_0/2pi)^2 / L_s(f),
// with p the share of the mode's inductive energy stored in L_s. For a lossless linear
// network p = -2 (L_s/omega) d omega / d L_s.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "kerrspec/core.hpp"

namespace kerrspec {

struct CircuitParams {
    double length{4.6e-3};                      // m
    double phase_velocity{0.398 * constants::c_light}; // m/s
    double z0{49.8};                            // ohm
    double c_in{3.4e-15};                       // F
    double c_shunt{3.3e-15};                    // F
    double i_c{0.90e-6};                        // A, per junction
    double c_j{20e-15};                         // F, whole SQUID
    double squid_position{0.5};                 // fraction of length from the feed end

    void validate() const {
        if (!(length > 0.0) || !(phase_velocity > 0.0) || !(z0 > 0.0))
            throw InvalidParameter("length, phase_velocity and z0 must be positive");
        if (!(c_in >= 0.0) || !(c_shunt >= 0.0) || !(c_j >= 0.0))
            throw InvalidParameter("capacitances must be non-negative");
        if (!(i_c > 0.0)) throw InvalidParameter("i_c must be positive");
        if (!(squid_position > 0.0 && squid_position < 1.0))
            throw InvalidParameter("squid_position must lie in (0, 1)");
    }

    /// Unloaded half-wave angular frequency pi v / length.
    double bare_half_wave() const { return std::numbers::pi * phase_velocity / length; }
};

/// Linear inductance of the SQUID, Phi_0 / (2 pi 2 I_c |cos(pi f)|).
inline double squid_inductance(const CircuitParams& cp, FluxBias f) {
    const double c = std::abs(std::cos(std::numbers::pi * f.reduced()));
    if (c < 1e-12) throw ModelFailure("SQUID inductance diverges at half a flux quantum");
    return constants::flux_quantum / (constants::two_pi * 2.0 * cp.i_c * c);
}

/// Josephson energy of the SQUID, (Phi_0/2pi)^2 / L_s.
inline double squid_josephson_energy(double l_s) {
    const double phi = constants::flux_quantum / constants::two_pi;
    return phi * phi / l_s;
}

namespace detail {

using Abcd = Eigen::Matrix2cd;

inline Abcd shunt(cplx y) {
    Abcd m;
    m << 1.0, 0.0, y, 1.0;
    return m;
}

inline Abcd line(double omega, double len, double v, double z0) {
    const double bl = omega * len / v;
    const cplx I(0.0, 1.0);
    Abcd m;
    m << std::cos(bl), I * z0 * std::sin(bl), I * std::sin(bl) / z0, std::cos(bl);
    return m;
}

/// Pole-free mode function: Im of (1 - w^2 L C_j) C_chain. Roots are the chain's modes.
inline double mode_function(const CircuitParams& cp, double l_s, double omega) {
    const cplx I(0.0, 1.0);
    const double l1 = cp.length * cp.squid_position;
    const double l2 = cp.length - l1;
    const Abcd p = shunt(I * omega * cp.c_in) * line(omega, l1, cp.phase_velocity, cp.z0);
    const Abcd q = line(omega, l2, cp.phase_velocity, cp.z0) * shunt(I * omega * cp.c_shunt);
    const Abcd pq = p * q;
    // Series element [[1, Z],[0, 1]] contributes Z P_21 Q_21 to the C entry.
    const cplx g = (1.0 - omega * omega * l_s * cp.c_j) * pq(1, 0) + I * omega * l_s * p(1, 0) * q(1, 0);
    return g.imag();
}

/// Lowest positive root of the mode function for a given SQUID inductance.
inline double resonance_for_inductance(const CircuitParams& cp, double l_s) {
    const double w0 = cp.bare_half_wave();
    const double w_lo = 1e-3 * w0;
    const double w_hi = 4.0 * w0;
    const int steps = 4000;
    const double dw = (w_hi - w_lo) / steps;
    double a = w_lo;
    double fa = mode_function(cp, l_s, a);
    for (int k = 1; k <= steps; ++k) {
        const double b = w_lo + k * dw;
        const double fb = mode_function(cp, l_s, b);
        if (fa == 0.0) return a;
        if ((fa < 0.0) != (fb < 0.0)) {
            auto f = [&](double w) { return mode_function(cp, l_s, w); };
            boost::uintmax_t iters = 200;
            const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb,
                                                             boost::math::tools::eps_tolerance<double>(40), iters);
            const double root = 0.5 * (r.first + r.second);
            // Zeros pinned to the SQUID plasma resonance are not modes of the chain.
            if (std::abs(1.0 - root * root * l_s * cp.c_j) > 1e-9) return root;
        }
        a = b;
        fa = fb;
    }
    std::ostringstream msg;
    msg << "no mode found between " << to_ghz(w_lo) << " and " << to_ghz(w_hi) << " GHz (" << steps
        << " scan steps, L_s = " << l_s << " H)";
    throw ModelFailure(msg.str());
}

} // namespace detail

/// Fundamental mode angular frequency at flux bias f.
inline double resonance_frequency(const CircuitParams& cp, FluxBias f) {
    cp.validate();
    return detail::resonance_for_inductance(cp, squid_inductance(cp, f));
}

/// Share of the mode's inductive energy stored in the SQUID.
inline double squid_participation(const CircuitParams& cp, FluxBias f) {
    cp.validate();
    const double l_s = squid_inductance(cp, f);
    const double h = 1e-4;
    const double w = detail::resonance_for_inductance(cp, l_s);
    const double wp = detail::resonance_for_inductance(cp, l_s * (1.0 + h));
    const double wm = detail::resonance_for_inductance(cp, l_s * (1.0 - h));
    const double dw_dl = (wp - wm) / (2.0 * h * l_s);
    return -2.0 * l_s / w * dw_dl;
}

/// Kerr coefficient (rad/s, negative).
inline double kerr_coefficient(const CircuitParams& cp, FluxBias f) {
    const double w = resonance_frequency(cp, f);
    const double p = squid_participation(cp, f);
    const double ej = squid_josephson_energy(squid_inductance(cp, f));
    return -p * p * constants::hbar * w * w / (8.0 * ej);
}

struct FluxCurve {
    std::vector<double> f;
    std::vector<double> omega_r;
    std::vector<double> kerr;
};

inline FluxCurve flux_curve(const CircuitParams& cp, std::span<const double> fluxes, bool with_kerr = true) {
    FluxCurve out;
    for (double f : fluxes) {
        out.f.push_back(f);
        out.omega_r.push_back(resonance_frequency(cp, FluxBias{f}));
        out.kerr.push_back(with_kerr ? kerr_coefficient(cp, FluxBias{f}) : 0.0);
    }
    return out;
}

} // namespace kerrspec
