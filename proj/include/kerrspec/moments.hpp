// moments.hpp - truncated steady-state hierarchy for the normally ordered moments
// alpha_{m,n} = <(a^dag)^m a^n> of a driven Kerr resonator, in a frame rotating at
// the probe (one tone) or drive (two tone) frequency.
//
// Row (m,n) of the steady-state system reads
//
//   0 = [(m-n)(w_r - w_f) + s + (m-n)(m+n-1)K/2 + i(m+n)k_tot/2] alpha_{m,n}
//       + (m-n)K alpha_{m+1,n+1} - n sqrt(k_e) E alpha_{m,n-1} + m sqrt(k_e) E* alpha_{m-1,n}
//
// with s = 0 for the stationary table and s = -(w_d - w_p) for the probe sideband.
// Moments outside max(m,n) <= n_max are set to zero.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kerrspec/core.hpp"
#include "kerrspec/linalg.hpp"

namespace kerrspec {

/// Moments alpha_{m,n} for 0 <= m,n <= n_max, row-major in m.
class MomentTable {
public:
    MomentTable() = default;
    explicit MomentTable(int n_max)
        : n_max_(n_max), values_(static_cast<std::size_t>((n_max + 1) * (n_max + 1))) {}

    int n_max() const noexcept { return n_max_; }

    /// Out-of-range indices read as zero (the truncation closure).
    cplx operator()(int m, int n) const noexcept {
        if (m < 0 || n < 0 || m > n_max_ || n > n_max_) return {};
        return values_[index(m, n)];
    }
    cplx& at(int m, int n) { return values_.at(index(m, n)); }

    std::span<const cplx> values() const noexcept { return values_; }

    double photon_number() const noexcept { return std::real((*this)(1, 1)); }

    // Solver provenance.
    double backward_error{0.0};
    double condition_estimate{0.0};

private:
    std::size_t index(int m, int n) const noexcept {
        return static_cast<std::size_t>(m * (n_max_ + 1) + n);
    }

    int n_max_{0};
    std::vector<cplx> values_;
};

/// Drive-frame stationary moments plus the linear response at the probe sideband.
struct TwoToneSolution {
    MomentTable drive_table;
    MomentTable probe_table;
};

namespace detail {

struct HierarchyTerms {
    double frame_detuning{0.0};  // omega_r - omega_frame
    double sideband_shift{0.0};  // -(omega_d - omega_p) for the probe system
    double kerr{0.0};
    double kappa_tot{0.0};
    double sqrt_kappa_e{0.0};
    cplx drive{};                // amplitude of the tone defining the frame
};

inline int unknown_index(int m, int n, int n_max) { return m * (n_max + 1) + n - 1; }

inline int unknown_count(int n_max) { return (n_max + 1) * (n_max + 1) - 1; }

/// Homogeneous operator of the hierarchy on all (m,n) != (0,0). Couplings into (0,0)
/// are reported through `on_identity(row, coefficient)` so the caller can place them.
template <typename IdentityCallback>
linalg::SpMat build_operator(int n_max, const HierarchyTerms& t, IdentityCallback&& on_identity) {
    const int dim = unknown_count(n_max);
    std::vector<Eigen::Triplet<cplx>> triplets;
    triplets.reserve(static_cast<std::size_t>(dim) * 4);

    const cplx drive = t.sqrt_kappa_e * t.drive;
    const cplx drive_conj = std::conj(drive);

    for (int m = 0; m <= n_max; ++m) {
        for (int n = 0; n <= n_max; ++n) {
            if (m == 0 && n == 0) continue;
            const int row = unknown_index(m, n, n_max);
            const double d = static_cast<double>(m - n);
            auto add = [&](int mm, int nn, cplx v) {
                if (v == cplx{}) return;
                if (mm < 0 || nn < 0 || mm > n_max || nn > n_max) return;
                if (mm == 0 && nn == 0) {
                    on_identity(row, v);
                    return;
                }
                triplets.emplace_back(row, unknown_index(mm, nn, n_max), v);
            };
            const cplx diag(d * t.frame_detuning + t.sideband_shift + 0.5 * d * (m + n - 1) * t.kerr,
                            0.5 * (m + n) * t.kappa_tot);
            add(m, n, diag);
            add(m + 1, n + 1, d * t.kerr);
            add(m, n - 1, -static_cast<double>(n) * drive);
            add(m - 1, n, static_cast<double>(m) * drive_conj);
        }
    }
    linalg::SpMat a(dim, dim);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

inline MomentTable unpack(const linalg::Vec& x, int n_max, cplx identity, const linalg::SolveReport& rep) {
    MomentTable table(n_max);
    table.at(0, 0) = identity;
    for (int m = 0; m <= n_max; ++m)
        for (int n = 0; n <= n_max; ++n)
            if (m != 0 || n != 0) table.at(m, n) = x[unknown_index(m, n, n_max)];
    table.backward_error = rep.backward_error;
    table.condition_estimate = rep.condition_estimate;
    return table;
}

/// Stationary moments in the frame of a single coherent tone with amplitude `amp`.
inline MomentTable solve_stationary(const DeviceParams& d, double omega_frame, cplx amp, int n_max) {
    const HierarchyTerms terms{d.omega_r - omega_frame, 0.0, d.kerr, d.kappa_tot(), std::sqrt(d.kappa_e), amp};
    linalg::Vec rhs = linalg::Vec::Zero(unknown_count(n_max));
    // alpha_{0,0} = 1 moves to the right-hand side.
    auto a = build_operator(n_max, terms, [&](int row, cplx v) { rhs[row] -= v; });
    linalg::SolveReport rep;
    const linalg::Vec x = linalg::solve(a, rhs, &rep);
    return unpack(x, n_max, cplx(1.0, 0.0), rep);
}

} // namespace detail

/// One-tone steady state in the probe frame at truncation order n_max.
inline MomentTable solve_one_tone(const DeviceParams& d, const ToneSpec& probe, int n_max) {
    d.validate();
    if (n_max < 1) throw InvalidParameter("n_max must be at least 1");
    const cplx amp = tone_amplitude(probe);
    if (!std::isfinite(std::abs(amp))) throw InvalidParameter("probe amplitude is not finite");
    return detail::solve_stationary(d, probe.omega, amp, n_max);
}

/// Drive-frame steady state, then the inhomogeneous probe-sideband system that is
/// exactly linear in the probe amplitude.
inline TwoToneSolution solve_two_tone(const DeviceParams& d, const ToneSpec& drive, const ToneSpec& probe, int n_max) {
    d.validate();
    if (n_max < 1) throw InvalidParameter("n_max must be at least 1");
    if (drive.omega == probe.omega) throw InvalidParameter("drive and probe frequencies must differ");
    const cplx e_d = tone_amplitude(drive);
    const cplx e_p = tone_amplitude(probe);

    TwoToneSolution out;
    out.drive_table = detail::solve_stationary(d, drive.omega, e_d, n_max);

    const detail::HierarchyTerms terms{d.omega_r - drive.omega, -(drive.omega - probe.omega), d.kerr,
                                       d.kappa_tot(), std::sqrt(d.kappa_e), e_d};
    // alpha^p_{0,0} = 0, so couplings into (0,0) vanish.
    auto a = detail::build_operator(n_max, terms, [](int, cplx) {});
    linalg::Vec rhs = linalg::Vec::Zero(detail::unknown_count(n_max));
    const cplx src = std::sqrt(d.kappa_e) * e_p;
    for (int m = 0; m <= n_max; ++m)
        for (int n = 1; n <= n_max; ++n)
            rhs[detail::unknown_index(m, n, n_max)] = static_cast<double>(n) * src * out.drive_table(m, n - 1);

    linalg::SolveReport rep;
    const linalg::Vec x = linalg::solve(a, rhs, &rep);
    out.probe_table = detail::unpack(x, n_max, cplx{}, rep);
    return out;
}

/// Gamma = 1 - i sqrt(kappa_e) alpha_{0,1} / E_p.
inline cplx reflection(const DeviceParams& d, const MomentTable& table, cplx probe_amplitude) {
    if (probe_amplitude == cplx{}) throw InvalidParameter("probe amplitude must be non-zero");
    return cplx(1.0, 0.0) - cplx(0.0, 1.0) * std::sqrt(d.kappa_e) * table(0, 1) / probe_amplitude;
}

inline cplx reflection(const DeviceParams& d, const TwoToneSolution& sol, cplx probe_amplitude) {
    return reflection(d, sol.probe_table, probe_amplitude);
}

struct ConvergedTable {
    MomentTable table;
    int order{0};
    bool converged{false};
    cplx gamma{};
};

struct ConvergenceOptions {
    double tol{1e-8};
    int n_start{8};
    int n_cap{64};
};

namespace detail {

template <typename GammaAt>
ConvergedTable converge(const DeviceParams& d, const ConvergenceOptions& opt, GammaAt&& gamma_at) {
    if (!(opt.tol > 0.0)) throw InvalidParameter("convergence tolerance must be positive");
    if (opt.n_start < 1 || opt.n_cap < opt.n_start) throw InvalidParameter("need 1 <= n_start <= n_cap");

    ConvergedTable out;
    int n = opt.n_start;
    auto [table, gamma] = gamma_at(n);
    out = ConvergedTable{std::move(table), n, false, gamma};
    // K = 0 has no upward coupling, so every truncation is exact.
    if (d.kerr == 0.0) {
        out.converged = true;
        return out;
    }
    while (n < opt.n_cap) {
        n = std::min(2 * n, opt.n_cap);
        auto [next_table, next_gamma] = gamma_at(n);
        const bool close = std::abs(next_gamma - out.gamma) < opt.tol;
        out = ConvergedTable{std::move(next_table), n, close, next_gamma};
        if (close) break;
    }
    return out;
}

} // namespace detail

/// Doubles n_max from n_start until |Gamma(n) - Gamma(previous n)| < tol or n_cap is reached.
inline ConvergedTable converge_one_tone(const DeviceParams& d, const ToneSpec& probe, const ConvergenceOptions& opt = {}) {
    const cplx amp = tone_amplitude(probe);
    return detail::converge(d, opt, [&](int n) {
        MomentTable t = solve_one_tone(d, probe, n);
        const cplx g = reflection(d, t, amp);
        return std::pair{std::move(t), g};
    });
}

struct ConvergedTwoTone {
    TwoToneSolution solution;
    int order{0};
    bool converged{false};
    cplx gamma{};
};

inline ConvergedTwoTone converge_two_tone(const DeviceParams& d, const ToneSpec& drive, const ToneSpec& probe,
                                          const ConvergenceOptions& opt = {}) {
    const cplx amp = tone_amplitude(probe);
    TwoToneSolution last;
    auto r = detail::converge(d, opt, [&](int n) {
        last = solve_two_tone(d, drive, probe, n);
        const cplx g = reflection(d, last, amp);
        return std::pair{last.probe_table, g};
    });
    return ConvergedTwoTone{std::move(last), r.order, r.converged, r.gamma};
}

} // namespace kerrspec
