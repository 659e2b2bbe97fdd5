// semiclassical.hpp - mean-field steady states of the driven and the parametrically pumped
// Kerr resonator, plus a stochastic mean-field model of phase locking.
//
// Frame conventions match moments.hpp: detuning D = omega - omega_r, and the coherent
// amplitude obeys
//   probe drive:  d alpha/dt = i(D - K|alpha|^2) alpha - k_tot/2 alpha - i sqrt(k_e) E
//   pumped:       d alpha/dt = i(D - K|alpha|^2) alpha - k_tot/2 alpha - i beta alpha*
// with the pump at 2 omega.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "kerrspec/core.hpp"

namespace kerrspec {

// ---------------------------------------------------------------------------------------------
// Polynomial helper

/// Real roots of c3 x^3 + c2 x^2 + c1 x + c0 (c3 != 0), ascending, Newton-polished.
inline std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0) {
    const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
    const double q = (a * a - 3.0 * b) / 9.0;
    const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    std::vector<double> roots;
    if (r * r < q * q * q) {
        const double theta = std::acos(std::clamp(r / std::sqrt(q * q * q), -1.0, 1.0));
        const double sq = -2.0 * std::sqrt(q);
        for (int k = 0; k < 3; ++k)
            roots.push_back(sq * std::cos((theta + constants::two_pi * (k - 1)) / 3.0) - a / 3.0);
    } else {
        const double big_a = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r * r - q * q * q)), r);
        const double big_b = big_a != 0.0 ? q / big_a : 0.0;
        roots.push_back(big_a + big_b - a / 3.0);
    }
    auto p = [&](double x) { return ((x + a) * x + b) * x + c; };
    auto dp = [&](double x) { return (3.0 * x + 2.0 * a) * x + b; };
    for (double& x : roots) {
        for (int it = 0; it < 50; ++it) {
            const double f = p(x), g = dp(x);
            if (g == 0.0) break;
            const double step = f / g;
            x -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

// ---------------------------------------------------------------------------------------------
// Duffing response to a single coherent tone

struct DuffingBranch {
    cplx amplitude{};
    double photons{0.0};
    bool stable{true};
};

/// All stationary mean-field states, sorted by photon number.
struct DuffingSolution {
    std::vector<DuffingBranch> branches;

    std::size_t stable_count() const {
        return static_cast<std::size_t>(std::count_if(branches.begin(), branches.end(),
                                                      [](const DuffingBranch& b) { return b.stable; }));
    }
};

namespace detail {

inline double duffing_residual(const DeviceParams& d, double det, double drive_sq, double n) {
    const double shift = det - d.kerr * n;
    const double lhs = n * (shift * shift + 0.25 * d.kappa_tot() * d.kappa_tot());
    return drive_sq > 0.0 ? std::abs(lhs - drive_sq) / drive_sq : std::abs(lhs);
}

} // namespace detail

/// Stationary states for a tone of amplitude `amp` at detuning `det` = omega - omega_r.
/// Photon numbers solve n[(D - K n)^2 + k^2/4] = k_e |E|^2.
inline DuffingSolution duffing_steady(const DeviceParams& d, double det, cplx amp) {
    d.validate();
    const double kappa = d.kappa_tot();
    const double drive_sq = d.kappa_e * std::norm(amp);
    DuffingSolution sol;
    if (drive_sq == 0.0) {
        sol.branches.push_back({cplx{}, 0.0, true});
        return sol;
    }
    std::vector<double> ns;
    if (d.kerr == 0.0) {
        ns.push_back(drive_sq / (det * det + 0.25 * kappa * kappa));
    } else {
        // In x = K n: x^3 - 2D x^2 + (D^2 + k^2/4) x - K k_e |E|^2 = 0.
        const auto xs = real_cubic_roots(1.0, -2.0 * det, det * det + 0.25 * kappa * kappa, -d.kerr * drive_sq);
        for (double x : xs) {
            const double n = x / d.kerr;
            if (n < 0.0) continue;
            // A double root at a fold shows up twice; keep one.
            if (!ns.empty() && std::abs(n - ns.back()) <= 1e-9 * std::max(1.0, n)) continue;
            ns.push_back(n);
        }
        std::sort(ns.begin(), ns.end());
    }
    const cplx src = std::sqrt(d.kappa_e) * amp;
    for (double n : ns) {
        const double shift = det - d.kerr * n;
        const cplx alpha = src / cplx(shift, 0.5 * kappa);
        // Linearization eigenvalues: -k/2 +- sqrt(K^2 n^2 - (D - 2 K n)^2).
        const double g = d.kerr * d.kerr * n * n - std::pow(det - 2.0 * d.kerr * n, 2);
        const bool stable = g < 0.0 || std::sqrt(g) < 0.5 * kappa;
        sol.branches.push_back({alpha, std::norm(alpha), stable});
    }
    return sol;
}

inline DuffingSolution duffing_steady(const DeviceParams& d, const ToneSpec& probe) {
    return duffing_steady(d, probe.omega - d.omega_r, tone_amplitude(probe));
}

/// Largest relative residual of the cubic over the returned branches.
inline double duffing_max_residual(const DeviceParams& d, double det, cplx amp, const DuffingSolution& sol) {
    double worst = 0.0;
    for (const auto& b : sol.branches)
        worst = std::max(worst, detail::duffing_residual(d, det, d.kappa_e * std::norm(amp), b.photons));
    return worst;
}

enum class BranchRule { Low, High, SweepUp, SweepDown };

/// Gamma = 1 - i sqrt(k_e) alpha / E for the branch chosen by `rule`. Sweep rules follow the
/// stable branch nearest to `previous`; without a previous state they start on the low branch.
inline cplx duffing_reflection(const DeviceParams& d, const DuffingSolution& sol, cplx probe_amplitude,
                               BranchRule rule, std::optional<cplx> previous = std::nullopt) {
    if (probe_amplitude == cplx{}) throw InvalidParameter("probe amplitude must be non-zero");
    std::vector<const DuffingBranch*> stable;
    for (const auto& b : sol.branches)
        if (b.stable) stable.push_back(&b);
    if (stable.empty()) throw NumericalFailure("no stable mean-field branch");

    const DuffingBranch* pick = stable.front();
    switch (rule) {
    case BranchRule::Low: pick = stable.front(); break;
    case BranchRule::High: pick = stable.back(); break;
    case BranchRule::SweepUp:
    case BranchRule::SweepDown:
        if (previous) {
            pick = *std::min_element(stable.begin(), stable.end(), [&](auto* a, auto* b) {
                return std::abs(a->amplitude - *previous) < std::abs(b->amplitude - *previous);
            });
        }
        break;
    }
    return cplx(1.0, 0.0) - cplx(0.0, 1.0) * std::sqrt(d.kappa_e) * pick->amplitude / probe_amplitude;
}

/// Reflection along a detuning axis at fixed power. The sweep direction of SweepUp/SweepDown
/// sets the continuation order; output is aligned with `detunings`.
inline std::vector<cplx> duffing_sweep(const DeviceParams& d, std::span<const double> detunings, double power_dbm,
                                       BranchRule rule) {
    std::vector<cplx> out(detunings.size());
    std::vector<std::size_t> order(detunings.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const bool descending = rule == BranchRule::SweepDown;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return descending ? detunings[a] > detunings[b] : detunings[a] < detunings[b];
    });
    std::optional<cplx> prev;
    for (std::size_t i : order) {
        const double omega = d.omega_r + detunings[i];
        const cplx amp = tone_amplitude(ToneSpec{omega, power_dbm, 0.0});
        const auto sol = duffing_steady(d, detunings[i], amp);
        if (amp == cplx{}) {
            out[i] = linear_reflection(d, omega);
            continue;
        }
        out[i] = duffing_reflection(d, sol, amp, rule, prev);
        prev = cplx(0.0, -1.0) * (cplx(1.0, 0.0) - out[i]) * amp / std::sqrt(d.kappa_e);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Parametrically pumped Kerr resonator

struct LockingTone {
    double amplitude{0.0};  // |E_s|, sqrt(photons/s)
    double phase{0.0};      // relative to the pump
};

struct PumpSpec {
    double pump_detuning{0.0};  // omega - omega_r, pump at 2 omega
    double beta{0.0};           // two-photon pump amplitude, rad/s
    std::optional<LockingTone> locking;
};

struct KpoState {
    cplx amplitude{};
    bool stable{true};
};

inline cplx kpo_rhs(const DeviceParams& d, double det, double beta, cplx alpha) {
    const cplx I(0.0, 1.0);
    return I * (det - d.kerr * std::norm(alpha)) * alpha - 0.5 * d.kappa_tot() * alpha - I * beta * std::conj(alpha);
}

/// |f(alpha)| scaled by the largest linear rate times |alpha|.
inline double kpo_residual(const DeviceParams& d, const PumpSpec& p, cplx alpha) {
    const double a = std::abs(alpha);
    if (a == 0.0) return 0.0;
    const double scale = std::max({std::abs(p.pump_detuning), p.beta, d.kappa_tot(), std::abs(d.kerr) * a * a}) * a;
    return std::abs(kpo_rhs(d, p.pump_detuning, p.beta, alpha)) / scale;
}

inline bool kpo_is_stable(const DeviceParams& d, const PumpSpec& p, cplx alpha) {
    const double n = std::norm(alpha);
    const double coupling = std::abs(d.kerr * alpha * alpha + p.beta);
    const double g = coupling * coupling - std::pow(p.pump_detuning - 2.0 * d.kerr * n, 2);
    return g < 0.0 || std::sqrt(g) < 0.5 * d.kappa_tot();
}

/// Vacuum first, then +-pairs of oscillating states (phases differing by pi).
inline std::vector<KpoState> kpo_steady_states(const DeviceParams& d, const PumpSpec& p) {
    d.validate();
    if (!(p.beta >= 0.0)) throw InvalidParameter("pump amplitude beta must be non-negative");
    std::vector<KpoState> out;
    out.push_back({cplx{}, kpo_is_stable(d, p, cplx{})});

    const double half_kappa = 0.5 * d.kappa_tot();
    if (d.kerr == 0.0 || p.beta <= half_kappa) return out;
    const double s = std::sqrt(p.beta * p.beta - half_kappa * half_kappa);
    std::vector<double> ns;
    for (double sign : {-1.0, 1.0}) {
        const double n = (p.pump_detuning + sign * s) / d.kerr;
        if (n > 0.0 && std::none_of(ns.begin(), ns.end(), [&](double m) { return std::abs(m - n) <= 1e-12 * n; }))
            ns.push_back(n);
    }
    std::sort(ns.begin(), ns.end());
    for (double n : ns) {
        // exp(-2 i theta) = [(D - K n) + i k/2] / beta
        const double theta = -0.5 * std::arg(cplx(p.pump_detuning - d.kerr * n, half_kappa));
        cplx alpha = std::polar(std::sqrt(n), theta);
        // One Newton step on the complex residual in (Re, Im) coordinates.
        for (int it = 0; it < 3; ++it) {
            const cplx f = kpo_rhs(d, p.pump_detuning, p.beta, alpha);
            const double nn = std::norm(alpha);
            const cplx I(0.0, 1.0);
            const cplx a_coef = I * (p.pump_detuning - 2.0 * d.kerr * nn) - half_kappa;
            const cplx b_coef = -I * (d.kerr * alpha * alpha + p.beta);
            // f(alpha + da) ~ f + a da + b conj(da)
            Eigen::Matrix2d jac;
            jac << a_coef.real() + b_coef.real(), -a_coef.imag() + b_coef.imag(),
                a_coef.imag() + b_coef.imag(), a_coef.real() - b_coef.real();
            const Eigen::Vector2d step = jac.fullPivLu().solve(Eigen::Vector2d(-f.real(), -f.imag()));
            alpha += cplx(step[0], step[1]);
        }
        const bool st = kpo_is_stable(d, p, alpha);
        out.push_back({alpha, st});
        out.push_back({-alpha, st});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Time integration of the mean-field equation

using MeanFieldState = std::array<double, 2>;

/// Deterministic integration with adaptive Dormand-Prince (tolerance 1e-8). `beta_of_t`
/// gives the pump amplitude at time t; `drive` is an optional coherent tone sqrt(k_e) E.
template <typename BetaOfT>
cplx integrate_mean_field(const DeviceParams& d, double det, BetaOfT&& beta_of_t, cplx alpha0, double t_final,
                          cplx drive = {}, double tolerance = 1e-8) {
    namespace odeint = boost::numeric::odeint;
    MeanFieldState x{alpha0.real(), alpha0.imag()};
    auto rhs = [&](const MeanFieldState& s, MeanFieldState& dxdt, double t) {
        const cplx a(s[0], s[1]);
        const cplx f = kpo_rhs(d, det, beta_of_t(t), a) - cplx(0.0, 1.0) * drive;
        dxdt[0] = f.real();
        dxdt[1] = f.imag();
    };
    const double rate = std::max({std::abs(det), d.kappa_tot(), std::abs(d.kerr) * std::norm(alpha0), 1.0});
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<MeanFieldState>>(tolerance, tolerance);
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, t_final, 0.01 / rate);
    return {x[0], x[1]};
}

struct LockingOptions {
    double ramp_time{0.0};       // beta rises linearly 0 -> beta over this time
    double hold_time{0.0};       // then held before classification
    double dt{0.0};              // fixed stochastic step; <= 0 picks 0.05 / max rate
    double noise{-1.0};          // sigma of d alpha = ... + sigma dW; < 0 picks sqrt(k_tot/2)
    double classify_fraction{0.5};
    unsigned threads{1};
};

struct LockingPoint {
    double phase{0.0};
    int n_zero{0};
    int n_pi{0};
    int n_unclassified{0};

    double p_pi() const {
        const int total = n_zero + n_pi;
        return total > 0 ? static_cast<double>(n_pi) / total : 0.0;
    }
};

inline double default_locking_noise(const DeviceParams& d) { return std::sqrt(0.5 * d.kappa_tot()); }

/// The oscillating state labelled "0": the stable pair member with phase in (-pi/2, pi/2].
inline std::optional<cplx> zero_phase_state(const DeviceParams& d, const PumpSpec& p) {
    std::optional<cplx> best;
    for (const auto& s : kpo_steady_states(d, p)) {
        if (!s.stable || s.amplitude == cplx{}) continue;
        const double ph = std::arg(s.amplitude);
        if (ph > -0.5 * std::numbers::pi && ph <= 0.5 * std::numbers::pi)
            if (!best || std::norm(s.amplitude) > std::norm(*best)) best = s.amplitude;
    }
    return best;
}

namespace detail {

/// One trajectory: locking tone sets alpha(0), pump ramps with the locking tone off.
/// Returns +1 (zero state), -1 (pi state) or 0 (unclassified).
inline int locking_trial(const DeviceParams& d, const PumpSpec& p, cplx alpha0, cplx reference, double sigma,
                         const LockingOptions& o, double dt, std::mt19937_64& rng) {
    const double t_total = o.ramp_time + o.hold_time;
    auto beta_at = [&](double t) {
        return o.ramp_time > 0.0 ? p.beta * std::min(1.0, t / o.ramp_time) : p.beta;
    };
    cplx alpha = alpha0;
    if (sigma > 0.0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        const auto steps = static_cast<long>(std::ceil(t_total / dt));
        const double h = t_total / static_cast<double>(std::max(1L, steps));
        const double amp = sigma * std::sqrt(0.5 * h);
        double t = 0.0;
        for (long k = 0; k < steps; ++k) {
            const cplx dw(amp * normal(rng), amp * normal(rng));
            // Stochastic Heun, additive noise.
            const cplx f0 = kpo_rhs(d, p.pump_detuning, beta_at(t), alpha);
            const cplx pred = alpha + h * f0 + dw;
            const cplx f1 = kpo_rhs(d, p.pump_detuning, beta_at(t + h), pred);
            alpha += 0.5 * h * (f0 + f1) + dw;
            t += h;
        }
    } else {
        alpha = integrate_mean_field(d, p.pump_detuning, beta_at, alpha0, t_total);
    }
    if (std::abs(alpha) < o.classify_fraction * std::abs(reference)) return 0;
    return std::real(alpha * std::conj(reference)) >= 0.0 ? 1 : -1;
}

} // namespace detail

/// Fraction of trials ending in the pi state for each locking phase (offsets added to
/// pump.locking->phase). Each trial draws its
/// noise from an RNG seeded by (seed, phase index, trial index), so results do not depend
/// on the thread count.
inline std::vector<LockingPoint> simulate_locking(const DeviceParams& d, const PumpSpec& pump,
                                                  std::span<const double> locking_phases, std::uint64_t seed,
                                                  int trials, const LockingOptions& opt) {
    d.validate();
    if (trials < 1) throw InvalidParameter("trials must be at least 1");
    if (!(opt.ramp_time >= 0.0) || !(opt.hold_time >= 0.0) || opt.ramp_time + opt.hold_time <= 0.0)
        throw InvalidParameter("ramp_time + hold_time must be positive");
    const auto reference = zero_phase_state(d, pump);
    if (!reference) throw InvalidParameter("pump does not support a stable oscillating pair");

    const double sigma = opt.noise < 0.0 ? default_locking_noise(d) : opt.noise;
    const double rate = std::max({std::abs(pump.pump_detuning), pump.beta, d.kappa_tot(),
                                  std::abs(d.kerr) * std::norm(*reference)});
    const double dt = opt.dt > 0.0 ? opt.dt : 0.05 / rate;
    const double lock_amp = pump.locking ? pump.locking->amplitude : 0.0;
    const double lock_phase0 = pump.locking ? pump.locking->phase : 0.0;

    const std::size_t n_phase = locking_phases.size();
    std::vector<int> outcome(n_phase * static_cast<std::size_t>(trials));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t job = begin; job < end; ++job) {
            const std::size_t ip = job / static_cast<std::size_t>(trials);
            const std::size_t it = job % static_cast<std::size_t>(trials);
            const cplx e_s = std::polar(lock_amp, lock_phase0 + locking_phases[ip]);
            // Linear steady response to the locking tone at omega.
            const cplx alpha0 = std::sqrt(d.kappa_e) * e_s / cplx(pump.pump_detuning, 0.5 * d.kappa_tot());
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(ip), static_cast<std::uint32_t>(it)};
            std::mt19937_64 rng(seq);
            outcome[job] = detail::locking_trial(d, pump, alpha0, *reference, sigma, opt, dt, rng);
        }
    };
    const std::size_t jobs = outcome.size();
    const unsigned nthreads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(jobs)));
    if (nthreads == 1) {
        work(0, jobs);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (jobs + nthreads - 1) / nthreads;
        for (unsigned t = 0; t < nthreads; ++t) {
            const std::size_t b = t * chunk, e = std::min(jobs, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }

    std::vector<LockingPoint> out(n_phase);
    for (std::size_t ip = 0; ip < n_phase; ++ip) {
        out[ip].phase = locking_phases[ip];
        for (int it = 0; it < trials; ++it) {
            const int r = outcome[ip * static_cast<std::size_t>(trials) + static_cast<std::size_t>(it)];
            if (r > 0) ++out[ip].n_zero;
            else if (r < 0) ++out[ip].n_pi;
            else ++out[ip].n_unclassified;
        }
    }
    return out;
}

} // namespace kerrspec
