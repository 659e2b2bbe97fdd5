// spectrum.hpp - reflection maps over (probe detuning, power) and dip extraction.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kerrspec/core.hpp"
#include "kerrspec/moments.hpp"
#include "kerrspec/semiclassical.hpp"

namespace kerrspec {

enum class Method { Auto, Linear, Moments, Semiclassical, TwoTone };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::Auto: return "auto";
    case Method::Linear: return "linear";
    case Method::Moments: return "moments";
    case Method::Semiclassical: return "semiclassical";
    case Method::TwoTone: return "two-tone";
    }
    return "unknown";
}

inline std::string to_string(BranchRule r) {
    switch (r) {
    case BranchRule::Low: return "low";
    case BranchRule::High: return "high";
    case BranchRule::SweepUp: return "sweep-up";
    case BranchRule::SweepDown: return "sweep-down";
    }
    return "unknown";
}

/// Complex reflection on a detuning x power grid. For two-tone maps the power axis is the
/// drive power and detunings are those of the probe.
struct SpectrumGrid {
    std::vector<double> detunings;  // rad/s, relative to omega_r
    std::vector<double> powers;     // dBm
    std::vector<cplx> gamma;        // gamma[ip * detunings.size() + id]
    std::vector<char> converged;
    std::vector<int> order;         // truncation order used (0 when not applicable)
    std::vector<std::string> error; // empty unless the point failed
    std::string method;

    std::size_t n_det() const { return detunings.size(); }
    std::size_t n_pow() const { return powers.size(); }
    std::size_t flat(std::size_t id, std::size_t ip) const { return ip * detunings.size() + id; }

    cplx at(std::size_t id, std::size_t ip) const { return gamma[flat(id, ip)]; }

    void resize() {
        const std::size_t n = n_det() * n_pow();
        gamma.assign(n, cplx{});
        converged.assign(n, 0);
        order.assign(n, 0);
        error.assign(n, {});
    }

    std::vector<double> column_abs(std::size_t ip) const {
        std::vector<double> out(n_det());
        for (std::size_t id = 0; id < n_det(); ++id) out[id] = std::abs(at(id, ip));
        return out;
    }

    std::size_t failed_points() const {
        return static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    }
};

struct SweepOptions {
    Method method{Method::Auto};
    ConvergenceOptions convergence{};
    BranchRule branch{BranchRule::SweepDown};
    double drive_detuning{0.0};      // two-tone: omega_d - omega_r
    double probe_power_dbm{-145.0};  // two-tone: reporting only, response is linear in E_p
    unsigned threads{1};
};

/// Method actually used for `requested`: Auto picks the mean-field model when |K| < k_tot.
inline Method resolve_method(const DeviceParams& d, Method requested) {
    if (requested != Method::Auto) return requested;
    return std::abs(d.kerr) < d.kappa_tot() ? Method::Semiclassical : Method::Moments;
}

namespace detail {

/// Runs body(job) for job in [0, n) over `threads` workers with static contiguous chunks.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (t == 1) {
        for (std::size_t j = 0; j < n; ++j) body(j);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + t - 1) / t;
    for (unsigned k = 0; k < t; ++k) {
        const std::size_t b = k * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] {
            for (std::size_t j = b; j < e; ++j) body(j);
        });
    }
}

} // namespace detail

/// Evaluates Gamma over the grid. Per-point failures are recorded, never thrown.
inline SpectrumGrid sweep_spectrum(const DeviceParams& d, std::span<const double> detunings,
                                   std::span<const double> powers, const SweepOptions& opt = {}) {
    d.validate();
    if (detunings.empty() || powers.empty()) throw InvalidParameter("sweep axes must be non-empty");
    SpectrumGrid g;
    g.detunings.assign(detunings.begin(), detunings.end());
    g.powers.assign(powers.begin(), powers.end());
    g.resize();
    const Method method = resolve_method(d, opt.method);
    g.method = to_string(method);
    if (method == Method::Semiclassical) g.method += ":" + to_string(opt.branch);

    auto fail = [&](std::size_t k, const std::exception& e) {
        g.gamma[k] = cplx(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
        g.converged[k] = 0;
        g.error[k] = e.what();
    };

    if (method == Method::Semiclassical) {
        // Continuation runs along detuning, so whole columns are the unit of work.
        detail::parallel_for(g.n_pow(), opt.threads, [&](std::size_t ip) {
            try {
                const auto col = duffing_sweep(d, g.detunings, g.powers[ip], opt.branch);
                for (std::size_t id = 0; id < g.n_det(); ++id) {
                    g.gamma[g.flat(id, ip)] = col[id];
                    g.converged[g.flat(id, ip)] = 1;
                }
            } catch (const std::exception& e) {
                for (std::size_t id = 0; id < g.n_det(); ++id) fail(g.flat(id, ip), e);
            }
        });
        return g;
    }

    detail::parallel_for(g.gamma.size(), opt.threads, [&](std::size_t k) {
        const std::size_t id = k % g.n_det();
        const std::size_t ip = k / g.n_det();
        const double omega_p = d.omega_r + g.detunings[id];
        try {
            switch (method) {
            case Method::Linear:
                g.gamma[k] = linear_reflection(d, omega_p);
                g.converged[k] = 1;
                break;
            case Method::Moments: {
                const auto r = converge_one_tone(d, ToneSpec{omega_p, g.powers[ip], 0.0}, opt.convergence);
                g.gamma[k] = r.gamma;
                g.converged[k] = r.converged ? 1 : 0;
                g.order[k] = r.order;
                break;
            }
            case Method::TwoTone: {
                const ToneSpec drive{d.omega_r + opt.drive_detuning, g.powers[ip], 0.0};
                const ToneSpec probe{omega_p, opt.probe_power_dbm, 0.0};
                const auto r = converge_two_tone(d, drive, probe, opt.convergence);
                g.gamma[k] = r.gamma;
                g.converged[k] = r.converged ? 1 : 0;
                g.order[k] = r.order;
                break;
            }
            default: break;
            }
        } catch (const std::exception& e) {
            fail(k, e);
        }
    });
    return g;
}

/// Evenly spaced axis including both ends.
inline std::vector<double> linspace(double start, double stop, std::size_t count) {
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = start;
        return v;
    }
    for (std::size_t i = 0; i < count; ++i)
        v[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    return v;
}

// ---------------------------------------------------------------------------------------------
// Dip extraction

struct Dip {
    double detuning{0.0};   // interpolated position
    double magnitude{1.0};  // interpolated |Gamma| at the minimum
    std::size_t index{0};   // grid index of the sampled minimum

    double depth() const { return 1.0 - magnitude; }
};

/// Vertex of the parabola through three points (non-uniform spacing allowed).
inline Dip parabolic_vertex(std::span<const double> x, std::span<const double> y, std::size_t i) {
    Dip out{x[i], y[i], i};
    if (i == 0 || i + 1 >= x.size()) return out;
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double curv = (d12 - d01) / (x2 - x0);  // half the second derivative
    if (!(curv > 0.0)) return out;
    const double b = d01 - curv * (x0 + x1);      // y = curv x^2 + b x + c
    const double xv = std::clamp(-b / (2.0 * curv), x0, x2);
    const double c = y1 - curv * x1 * x1 - b * x1;
    out.detuning = xv;
    out.magnitude = curv * xv * xv + b * xv + c;
    return out;
}

/// Interior local minima of y(x), parabolically refined, in order of x.
inline std::vector<Dip> local_minima(std::span<const double> x, std::span<const double> y) {
    std::vector<Dip> out;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (!(y[i] < y[i - 1])) continue;
        std::size_t j = i;
        while (j + 1 < y.size() && y[j + 1] == y[i]) ++j;  // plateau
        if (j + 1 < y.size() && y[i] < y[j + 1]) out.push_back(parabolic_vertex(x, y, (i + j) / 2));
        i = j;
    }
    return out;
}

/// Global minimum of y, parabolically refined. `interior` is false when it sits on an edge.
inline Dip global_minimum(std::span<const double> x, std::span<const double> y, bool* interior = nullptr) {
    const auto it = std::min_element(y.begin(), y.end());
    const auto i = static_cast<std::size_t>(it - y.begin());
    if (interior) *interior = i > 0 && i + 1 < y.size();
    return parabolic_vertex(x, y, i);
}

} // namespace kerrspec
