// lindblad.hpp - brute-force stationary density matrix of the driven Kerr resonator in a
// truncated Fock basis. Independent of the moment hierarchy; used as its oracle.
//
// Rotating-frame generator (frame at the drive frequency w):
//   H = (w_r - w) a^dag a + K/2 a^dag a^dag a a + sqrt(k_e) (E a^dag + E* a)
//   d rho/dt = -i[H, rho] + k_tot (a rho a^dag - {a^dag a, rho}/2)

#pragma once

#include <cmath>
#include <vector>

#include "kerrspec/core.hpp"
#include "kerrspec/linalg.hpp"
#include "kerrspec/moments.hpp"

namespace kerrspec {

struct LindbladResult {
    MomentTable moments;
    Eigen::MatrixXcd rho;
    double top_population{0.0};  // <D-1|rho|D-1>
    bool cutoff_ok{true};        // top_population below threshold
};

inline LindbladResult lindblad_steady_state(const DeviceParams& d, const ToneSpec& drive, int fock_cutoff,
                                            double top_population_threshold = 1e-10) {
    d.validate();
    if (fock_cutoff < 2) throw InvalidParameter("fock_cutoff must be at least 2");
    const int dim = fock_cutoff;
    const int n2 = dim * dim;
    const cplx amp = std::sqrt(d.kappa_e) * tone_amplitude(drive);
    const double det = d.omega_r - drive.omega;
    const double kappa = d.kappa_tot();
    const cplx I(0.0, 1.0);

    // H is tridiagonal in the Fock basis.
    std::vector<double> h_diag(dim);
    for (int k = 0; k < dim; ++k) h_diag[k] = det * k + 0.5 * d.kerr * k * (k - 1);
    auto h = [&](int i, int j) -> cplx {
        if (i == j) return h_diag[i];
        if (i == j + 1) return amp * std::sqrt(static_cast<double>(i));           // a^dag
        if (j == i + 1) return std::conj(amp) * std::sqrt(static_cast<double>(j)); // a
        return {};
    };

    // vec(rho) index i + dim * j for rho_{ij}.
    auto vid = [dim](int i, int j) { return i + dim * j; };
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(n2) * 7);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            const int row = vid(i, j);
            if (row == 0) continue;  // replaced by the trace condition
            // -i (H rho)_{ij} = -i sum_k H_ik rho_kj
            for (int k = std::max(0, i - 1); k <= std::min(dim - 1, i + 1); ++k) {
                const cplx v = h(i, k);
                if (v != cplx{}) trip.emplace_back(row, vid(k, j), -I * v);
            }
            // +i (rho H)_{ij} = +i sum_k rho_ik H_kj
            for (int k = std::max(0, j - 1); k <= std::min(dim - 1, j + 1); ++k) {
                const cplx v = h(k, j);
                if (v != cplx{}) trip.emplace_back(row, vid(i, k), I * v);
            }
            // kappa (a rho a^dag)_{ij} = kappa sqrt((i+1)(j+1)) rho_{i+1,j+1}
            if (i + 1 < dim && j + 1 < dim)
                trip.emplace_back(row, vid(i + 1, j + 1), kappa * std::sqrt(static_cast<double>((i + 1) * (j + 1))));
            trip.emplace_back(row, row, -0.5 * kappa * (i + j));
        }
    }
    for (int k = 0; k < dim; ++k) trip.emplace_back(0, vid(k, k), 1.0);

    linalg::SpMat gen(n2, n2);
    gen.setFromTriplets(trip.begin(), trip.end());
    gen.makeCompressed();
    linalg::Vec rhs = linalg::Vec::Zero(n2);
    rhs[0] = 1.0;

    linalg::SolveOptions opt;
    opt.condition_limit = 1e16;
    linalg::SolveReport rep;
    const linalg::Vec x = linalg::solve(gen, rhs, &rep, opt);

    LindbladResult out;
    out.rho.resize(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) out.rho(i, j) = x[vid(i, j)];
    out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();

    // alpha_{m,n} = tr(rho a^dag^m a^n) = sum_l rho_{l,k} <k| a^dag^m a^n |l>, k = l - n + m.
    const int n_max = dim - 1;
    MomentTable table(n_max);
    for (int m = 0; m <= n_max; ++m) {
        for (int n = 0; n <= n_max; ++n) {
            cplx acc{};
            for (int l = n; l < dim; ++l) {
                const int k = l - n + m;
                if (k >= dim) break;
                // sqrt(l!/(l-n)!) * sqrt(k!/(l-n)!)
                double w = 1.0;
                for (int q = l - n + 1; q <= l; ++q) w *= std::sqrt(static_cast<double>(q));
                for (int q = l - n + 1; q <= k; ++q) w *= std::sqrt(static_cast<double>(q));
                acc += out.rho(l, k) * w;
            }
            table.at(m, n) = acc;
        }
    }
    table.at(0, 0) = 1.0;
    table.backward_error = rep.backward_error;
    table.condition_estimate = rep.condition_estimate;
    out.moments = std::move(table);
    out.top_population = std::real(out.rho(dim - 1, dim - 1));
    out.cutoff_ok = out.top_population <= top_population_threshold;
    return out;
}

} // namespace kerrspec
