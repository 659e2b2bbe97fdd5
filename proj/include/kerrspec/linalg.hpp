// linalg.hpp - sparse complex direct solve with refinement and a 1-norm condition estimate.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "kerrspec/error.hpp"

namespace kerrspec::linalg {

using SpMat = Eigen::SparseMatrix<std::complex<double>, Eigen::ColMajor>;
using Vec = Eigen::VectorXcd;

struct SolveReport {
    double backward_error{0.0};      // ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)
    double condition_estimate{0.0};  // ||A||_1 * est(||A^-1||_1)
    int refinements{0};
};

struct SolveOptions {
    double refine_above{1e-10};
    int max_refinements{3};
    double condition_limit{1e14};
    double backward_error_limit{1e-8};
};

inline double norm_inf(const SpMat& a) {
    Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it)
            row_sums[it.row()] += std::abs(it.value());
    return row_sums.size() ? row_sums.maxCoeff() : 0.0;
}

inline double norm_1(const SpMat& a) {
    double best = 0.0;
    for (int k = 0; k < a.outerSize(); ++k) {
        double s = 0.0;
        for (SpMat::InnerIterator it(a, k); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

/// Hager/Higham estimate of ||A^-1||_1 using an existing factorization.
template <typename Factorization>
double inverse_norm1_estimate(Factorization& lu, Eigen::Index n) {
    if (n == 0) return 0.0;
    Vec x = Vec::Constant(n, std::complex<double>(1.0 / static_cast<double>(n), 0.0));
    double estimate = 0.0;
    Eigen::Index last_j = -1;
    for (int iter = 0; iter < 5; ++iter) {
        Vec y = lu.solve(x);
        estimate = y.cwiseAbs().sum();
        Vec xi(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = std::abs(y[i]);
            xi[i] = a > 0.0 ? y[i] / a : std::complex<double>(1.0, 0.0);
        }
        Vec z = lu.adjoint().solve(xi);
        Eigen::Index j = 0;
        const double zmax = z.cwiseAbs().maxCoeff(&j);
        if (zmax <= std::real(z.dot(x)) || j == last_j) break;
        x.setZero();
        x[j] = 1.0;
        last_j = j;
    }
    return estimate;
}

/// Row then column max-norm scaling factors (as in LAPACK's geequ).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> equilibration(const SpMat& a) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) r[it.row()] = std::max(r[it.row()], std::abs(it.value()));
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = r[i] > 0.0 ? 1.0 / r[i] : 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(a.cols());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) c[it.col()] = std::max(c[it.col()], r[it.row()] * std::abs(it.value()));
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = c[j] > 0.0 ? 1.0 / c[j] : 1.0;
    return {r, c};
}

/// Solve A x = b by sparse LU of the equilibrated matrix R A C. Throws NumericalFailure when
/// the factorization fails, the condition estimate of R A C exceeds the limit, or refinement
/// cannot reach the backward-error limit.
inline Vec solve(const SpMat& a, const Vec& b, SolveReport* report = nullptr, const SolveOptions& opt = {}) {
    const auto [r_scale, c_scale] = equilibration(a);
    const SpMat scaled = r_scale.cast<std::complex<double>>().asDiagonal() * a *
                         c_scale.cast<std::complex<double>>().asDiagonal();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(scaled);
    lu.factorize(scaled);
    if (lu.info() != Eigen::Success)
        throw NumericalFailure("sparse LU factorization failed: " + lu.lastErrorMessage(),
                               std::numeric_limits<double>::infinity());

    const double cond = norm_1(scaled) * inverse_norm1_estimate(lu, scaled.rows());
    if (!std::isfinite(cond) || cond > opt.condition_limit)
        throw NumericalFailure("ill-conditioned moment system", cond);

    const double a_inf = norm_inf(a);
    const double b_inf = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    auto backward = [&](const Vec& x, const Vec& r) {
        const double x_inf = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
        const double denom = a_inf * x_inf + b_inf;
        return denom > 0.0 ? r.cwiseAbs().maxCoeff() / denom : 0.0;
    };
    auto correction = [&](const Vec& rhs) -> Vec {
        return c_scale.cwiseProduct(lu.solve(r_scale.cwiseProduct(rhs)));
    };

    Vec x = correction(b);
    Vec r = b - a * x;
    double berr = backward(x, r);
    int refinements = 0;
    while (berr > opt.refine_above && refinements < opt.max_refinements) {
        x += correction(r);
        r = b - a * x;
        berr = backward(x, r);
        ++refinements;
    }
    if (!(berr <= opt.backward_error_limit))
        throw NumericalFailure("residual above tolerance after refinement", cond);

    if (report) *report = SolveReport{berr, cond, refinements};
    return x;
}

} // namespace kerrspec::linalg
