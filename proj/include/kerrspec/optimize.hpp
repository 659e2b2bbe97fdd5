// optimize.hpp - GSL-backed nonlinear least squares and simplex minimization.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

namespace kerrspec::optimize {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct LeastSquaresResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd covariance;  // scaled by the residual variance
    double residual_rms{0.0};
    double chi2{0.0};
    bool converged{false};
    int iterations{0};
};

struct LeastSquaresOptions {
    int max_iterations{200};
    double xtol{1e-12};
    double gtol{1e-12};
    double ftol{0.0};
};

namespace detail {

inline void silence_gsl() {
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

struct LsqContext {
    const ResidualFn* fn;
    Eigen::Index n_residuals;
};

inline int lsq_f(const gsl_vector* x, void* params, gsl_vector* f) {
    auto* ctx = static_cast<LsqContext*>(params);
    Eigen::VectorXd xv(static_cast<Eigen::Index>(x->size));
    for (std::size_t i = 0; i < x->size; ++i) xv[static_cast<Eigen::Index>(i)] = gsl_vector_get(x, i);
    const Eigen::VectorXd r = (*ctx->fn)(xv);
    if (r.size() != ctx->n_residuals) return GSL_EBADLEN;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i])) return GSL_EDOM;
        gsl_vector_set(f, static_cast<std::size_t>(i), r[i]);
    }
    return GSL_SUCCESS;
}

} // namespace detail

/// Levenberg-Marquardt (trust region, finite-difference Jacobian).
inline LeastSquaresResult least_squares(const ResidualFn& fn, const Eigen::VectorXd& x0,
                                        const LeastSquaresOptions& opt = {}) {
    detail::silence_gsl();
    const Eigen::VectorXd r0 = fn(x0);
    const auto n = static_cast<std::size_t>(r0.size());
    const auto p = static_cast<std::size_t>(x0.size());
    detail::LsqContext ctx{&fn, r0.size()};

    gsl_multifit_nlinear_fdf fdf{};
    fdf.f = detail::lsq_f;
    fdf.df = nullptr;
    fdf.fvv = nullptr;
    fdf.n = n;
    fdf.p = p;
    fdf.params = &ctx;

    gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
    params.trs = gsl_multifit_nlinear_trs_lm;
    params.scale = gsl_multifit_nlinear_scale_more;
    gsl_multifit_nlinear_workspace* w = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, n, p);

    gsl_vector* x = gsl_vector_alloc(p);
    for (std::size_t i = 0; i < p; ++i) gsl_vector_set(x, i, x0[static_cast<Eigen::Index>(i)]);
    gsl_multifit_nlinear_init(x, &fdf, w);
    int info = 0;
    const int status = gsl_multifit_nlinear_driver(static_cast<std::size_t>(opt.max_iterations), opt.xtol, opt.gtol,
                                                   opt.ftol, nullptr, nullptr, &info, w);

    LeastSquaresResult out;
    const gsl_vector* xs = gsl_multifit_nlinear_position(w);
    out.x.resize(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) out.x[static_cast<Eigen::Index>(i)] = gsl_vector_get(xs, i);
    const gsl_vector* f = gsl_multifit_nlinear_residual(w);
    double chi2 = 0.0;
    gsl_blas_ddot(f, f, &chi2);
    out.chi2 = chi2;
    out.residual_rms = std::sqrt(chi2 / static_cast<double>(n));
    out.iterations = static_cast<int>(gsl_multifit_nlinear_niter(w));
    // A residual already at rounding level stalls the trust region without tripping xtol.
    const double r0_sq = r0.squaredNorm();
    out.converged = status == GSL_SUCCESS || (status == GSL_ENOPROG && chi2 <= 1e-24 * std::max(1.0, r0_sq));

    gsl_matrix* covar = gsl_matrix_alloc(p, p);
    gsl_multifit_nlinear_covar(gsl_multifit_nlinear_jac(w), 0.0, covar);
    const double dof = n > p ? static_cast<double>(n - p) : 1.0;
    const double s2 = chi2 / dof;
    out.covariance.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            out.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s2 * gsl_matrix_get(covar, i, j);

    gsl_matrix_free(covar);
    gsl_vector_free(x);
    gsl_multifit_nlinear_free(w);
    return out;
}

struct SimplexResult {
    Eigen::VectorXd x;
    double value{std::numeric_limits<double>::infinity()};
    bool converged{false};
    int iterations{0};
    int starts{0};
};

struct SimplexOptions {
    int max_iterations{2000};
    double size_tol{1e-8};  // simplex characteristic size, in the units of x
    int restarts{5};        // extra starts when the first does not converge
    double restart_spread{1.0}; // restart offsets as multiples of the initial step
};

namespace detail {

struct SimplexContext {
    const ObjectiveFn* fn;
};

inline double simplex_f(const gsl_vector* x, void* params) {
    auto* ctx = static_cast<SimplexContext*>(params);
    Eigen::VectorXd xv(static_cast<Eigen::Index>(x->size));
    for (std::size_t i = 0; i < x->size; ++i) xv[static_cast<Eigen::Index>(i)] = gsl_vector_get(x, i);
    const double v = (*ctx->fn)(xv);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

inline SimplexResult simplex_once(const ObjectiveFn& fn, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                  const SimplexOptions& opt) {
    const auto p = static_cast<std::size_t>(x0.size());
    SimplexContext ctx{&fn};
    gsl_multimin_function func{};
    func.f = simplex_f;
    func.n = p;
    func.params = &ctx;

    gsl_vector* x = gsl_vector_alloc(p);
    gsl_vector* ss = gsl_vector_alloc(p);
    for (std::size_t i = 0; i < p; ++i) {
        gsl_vector_set(x, i, x0[static_cast<Eigen::Index>(i)]);
        gsl_vector_set(ss, i, step[static_cast<Eigen::Index>(i)]);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, p);
    gsl_multimin_fminimizer_set(s, &func, x, ss);

    SimplexResult out;
    int status = GSL_CONTINUE;
    int iter = 0;
    while (status == GSL_CONTINUE && iter < opt.max_iterations) {
        ++iter;
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.size_tol);
    }
    out.x.resize(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) out.x[static_cast<Eigen::Index>(i)] = gsl_vector_get(s->x, i);
    out.value = s->fval;
    out.converged = status == GSL_SUCCESS;
    out.iterations = iter;
    out.starts = 1;

    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(ss);
    gsl_vector_free(x);
    return out;
}

} // namespace detail

/// Nelder-Mead simplex. If the first run does not converge, restarts from the best point
/// found so far, offset along alternating axes, and keeps the lowest value.
inline SimplexResult simplex(const ObjectiveFn& fn, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const SimplexOptions& opt = {}) {
    detail::silence_gsl();
    SimplexResult best = detail::simplex_once(fn, x0, step, opt);
    int starts = 1;
    for (int k = 0; k < opt.restarts && !best.converged; ++k) {
        Eigen::VectorXd start = best.x;
        const Eigen::Index axis = k % x0.size();
        start[axis] += (k % 2 == 0 ? 1.0 : -1.0) * opt.restart_spread * step[axis];
        SimplexResult r = detail::simplex_once(fn, start, step, opt);
        ++starts;
        if (r.value < best.value || (r.converged && r.value <= best.value * (1.0 + 1e-12))) best = r;
    }
    best.starts = starts;
    return best;
}

/// Central-difference Hessian of a scalar objective.
inline Eigen::MatrixXd numeric_hessian(const ObjectiveFn& fn, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    const Eigen::Index p = x.size();
    Eigen::MatrixXd hess(p, p);
    const double f0 = fn(x);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i; j < p; ++j) {
            if (i == j) {
                Eigen::VectorXd xp = x, xm = x;
                xp[i] += h[i];
                xm[i] -= h[i];
                hess(i, i) = (fn(xp) - 2.0 * f0 + fn(xm)) / (h[i] * h[i]);
            } else {
                Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
                xpp[i] += h[i]; xpp[j] += h[j];
                xpm[i] += h[i]; xpm[j] -= h[j];
                xmp[i] -= h[i]; xmp[j] += h[j];
                xmm[i] -= h[i]; xmm[j] -= h[j];
                hess(i, j) = hess(j, i) = (fn(xpp) - fn(xpm) - fn(xmp) + fn(xmm)) / (4.0 * h[i] * h[j]);
            }
        }
    }
    return hess;
}

} // namespace kerrspec::optimize
