#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "kerrspec/moments.hpp"
#include "kerrspec/semiclassical.hpp"

using namespace kerrspec;

namespace {

/// d alpha/dt = i(D - K|a|^2) a - k/2 a - i beta conj(a) - i sqrt(k_e) E.
cplx mean_field(const DeviceParams& d, double det, double beta, cplx drive, cplx a) {
    const cplx i(0.0, 1.0);
    return i * (det - d.kerr * std::norm(a)) * a - 0.5 * d.kappa_tot() * a - i * beta * std::conj(a) -
           i * std::sqrt(d.kappa_e) * drive;
}

/// Largest real part of the Jacobian eigenvalues by central differences in (Re, Im).
double max_growth_rate(const DeviceParams& d, double det, double beta, cplx drive, cplx a) {
    const double h = 1e-7 * std::max(1.0, std::abs(a));
    Eigen::Matrix2d j;
    for (int c = 0; c < 2; ++c) {
        const cplx step = c == 0 ? cplx(h, 0.0) : cplx(0.0, h);
        const cplx df = (mean_field(d, det, beta, drive, a + step) - mean_field(d, det, beta, drive, a - step)) / (2.0 * h);
        j(0, c) = df.real();
        j(1, c) = df.imag();
    }
    return j.eigenvalues().real().maxCoeff();
}

DeviceParams random_device(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return DeviceParams::from_lab(8.0 + 4.0 * u(rng), -(0.05 + 12.0 * u(rng)), 0.2 + 1.5 * u(rng), 0.2 + 1.5 * u(rng));
}

} // namespace

TEST(CubicRoots, RecoversConstructedRoots) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        std::array<double, 3> r{u(rng), u(rng), u(rng)};
        std::sort(r.begin(), r.end());
        const double c2 = -(r[0] + r[1] + r[2]);
        const double c1 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        const double c0 = -r[0] * r[1] * r[2];
        const auto got = real_cubic_roots(1.0, c2, c1, c0);
        ASSERT_EQ(got.size(), 3u);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], r[k], 1e-7 * (1.0 + std::abs(r[k])));
    }
}

TEST(CubicRoots, SingleRealRoot) {
    // (x - 2)(x^2 + 1)
    const auto got = real_cubic_roots(1.0, -2.0, 1.0, -2.0);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_NEAR(got[0], 2.0, 1e-12);
}

TEST(Duffing, BranchesSolveTheCubicAndStabilityMatchesJacobian) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bistable = 0;
    for (int i = 0; i < 300; ++i) {
        const DeviceParams d = random_device(rng);
        const double k = d.kappa_tot();
        const double det = (-8.0 + 10.0 * u(rng)) * k;
        const double power = -150.0 + 35.0 * u(rng);
        const cplx amp = tone_amplitude(ToneSpec{d.omega_r + det, power, 0.0});
        const auto sol = duffing_steady(d, det, amp);
        ASSERT_TRUE(sol.branches.size() == 1 || sol.branches.size() == 3 || sol.branches.size() == 2);
        EXPECT_LT(duffing_max_residual(d, det, amp, sol), 1e-9);
        if (sol.branches.size() == 3) {
            ++bistable;
            EXPECT_FALSE(sol.branches[1].stable);
        }
        for (const auto& b : sol.branches) {
            EXPECT_LT(std::abs(mean_field(d, det, 0.0, amp, b.amplitude)), 1e-6 * k * (1.0 + std::abs(b.amplitude)));
            const double growth = max_growth_rate(d, det, 0.0, amp, b.amplitude);
            if (std::abs(growth) > 1e-6 * k) { EXPECT_EQ(b.stable, growth < 0.0); }
        }
    }
    EXPECT_GT(bistable, 10);
}

TEST(Duffing, BistabilityRequiresDetuningOnTheKerrSide) {
    const auto d = DeviceParams::from_lab(11.742, -0.45, 0.85, 1.01);
    for (double det_mhz : {0.5, 1.0, 3.0})
        for (double p : {-140.0, -125.0, -110.0})
            EXPECT_EQ(duffing_steady(d, ToneSpec{d.omega_r + mhz(det_mhz), p, 0.0}).branches.size(), 1u);
    EXPECT_EQ(duffing_steady(d, ToneSpec{d.omega_r + mhz(-10.0), -117.5, 0.0}).branches.size(), 3u);
}

TEST(Duffing, ZeroKerrIsLinear) {
    auto d = DeviceParams::from_lab(10.0, 0.0, 0.8, 0.6);
    for (double det_mhz : {-2.0, 0.0, 1.3}) {
        const ToneSpec t{d.omega_r + mhz(det_mhz), -100.0, 0.0};
        const auto sol = duffing_steady(d, t);
        ASSERT_EQ(sol.branches.size(), 1u);
        EXPECT_LT(std::abs(duffing_reflection(d, sol, tone_amplitude(t), BranchRule::Low) - linear_reflection(d, t.omega)),
                  1e-12);
    }
}

TEST(Duffing, AgreesWithMomentSolverInTheClassicalLimit) {
    // At fixed K n the quantum correction scales with K / k_tot: halving K (and doubling the
    // photon number) should roughly halve the discrepancy.
    auto discrepancy = [](double kerr_mhz, double power_dbm) {
        const auto d = DeviceParams::from_lab(11.742, kerr_mhz, 0.85, 1.01);
        double worst = 0.0;
        for (double det_mhz : {-1.0, -0.3, 0.0, 0.6}) {
            const ToneSpec t{d.omega_r + mhz(det_mhz), power_dbm, 0.0};
            const auto sol = duffing_steady(d, t);
            EXPECT_EQ(sol.branches.size(), 1u);
            const cplx sc = duffing_reflection(d, sol, tone_amplitude(t), BranchRule::Low);
            const auto m = converge_one_tone(d, t, ConvergenceOptions{1e-9, 8, 32});
            EXPECT_TRUE(m.converged);
            worst = std::max(worst, std::abs(sc - m.gamma));
        }
        return worst;
    };
    const double coarse = discrepancy(-0.1, -132.0);
    const double fine = discrepancy(-0.05, -132.0 + 10.0 * std::log10(2.0));
    EXPECT_LT(coarse, 0.01);
    EXPECT_LT(fine, 0.7 * coarse);
}

TEST(Duffing, SweepDirectionsShowHysteresis) {
    const auto d = DeviceParams::from_lab(11.742, -0.45, 0.85, 1.01);
    std::vector<double> det;
    for (int i = 0; i <= 220; ++i) det.push_back(mhz(-20.0 + 22.0 * i / 220.0));
    const auto down = duffing_sweep(d, det, -117.5, BranchRule::SweepDown);
    const auto up = duffing_sweep(d, det, -117.5, BranchRule::SweepUp);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < det.size(); ++i) max_diff = std::max(max_diff, std::abs(down[i] - up[i]));
    EXPECT_GT(max_diff, 0.1);
    // Outside the fold both agree.
    EXPECT_LT(std::abs(down.back() - up.back()), 1e-12);
    EXPECT_LT(std::abs(down.front() - up.front()), 1e-12);
    for (const auto& g : down) EXPECT_LE(std::abs(g), 1.0 + 1e-12);
}

TEST(Kpo, NoPumpLeavesOnlyStableVacuum) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const auto s = kpo_steady_states(d, PumpSpec{mhz(-120.0), 0.0, std::nullopt});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_TRUE(s[0].stable);
    EXPECT_EQ(s[0].amplitude, cplx{});
}

TEST(Kpo, AboveThresholdPairHasEqualMagnitudeAndOppositePhase) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const DeviceParams d = random_device(rng);
        const double det = mhz(-200.0 + 400.0 * u(rng));
        const double th = std::sqrt(det * det + 0.25 * d.kappa_tot() * d.kappa_tot());
        const PumpSpec p{det, th * (1.0 + 0.5 * u(rng)), std::nullopt};
        const auto s = kpo_steady_states(d, p);
        EXPECT_FALSE(s[0].stable);
        std::vector<KpoState> stable;
        for (const auto& x : s)
            if (x.stable) stable.push_back(x);
        ASSERT_EQ(stable.size(), 2u);
        EXPECT_NEAR(std::abs(stable[0].amplitude), std::abs(stable[1].amplitude), 1e-12 * std::abs(stable[0].amplitude));
        EXPECT_LT(std::abs(stable[0].amplitude + stable[1].amplitude), 1e-12 * std::abs(stable[0].amplitude));
        for (const auto& x : s) {
            EXPECT_LT(kpo_residual(d, p, x.amplitude), 1e-10);
            const double growth = max_growth_rate(d, det, p.beta, 0.0, x.amplitude);
            if (std::abs(growth) > 1e-6 * d.kappa_tot()) { EXPECT_EQ(x.stable, growth < 0.0); }
        }
    }
}

TEST(Kpo, BelowThresholdWithNegativeDetuningIsBistable) {
    // K < 0 and D < 0: the large pair coexists with a stable vacuum below threshold.
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const double det = mhz(-120.0);
    const double th = std::sqrt(det * det + 0.25 * d.kappa_tot() * d.kappa_tot());
    const auto s = kpo_steady_states(d, PumpSpec{det, 0.8 * th, std::nullopt});
    ASSERT_EQ(s.size(), 5u);
    EXPECT_TRUE(s[0].stable);
    int stable = 0;
    for (const auto& x : s) stable += x.stable;
    EXPECT_EQ(stable, 3);
}

TEST(Kpo, ThresholdBelowHalfKappaHasNoOscillation) {
    const auto d = DeviceParams::from_lab(10.0, -1.0, 0.5, 0.5);
    EXPECT_EQ(kpo_steady_states(d, PumpSpec{0.0, 0.4 * d.kappa_tot(), std::nullopt}).size(), 1u);
    EXPECT_THROW(kpo_steady_states(d, PumpSpec{0.0, -1.0, std::nullopt}), InvalidParameter);
}

TEST(MeanField, IntegrationRelaxesToTheStableState) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const double det = mhz(-120.0);
    const PumpSpec p{det, 1.05 * std::abs(det), std::nullopt};
    const auto target = *zero_phase_state(d, p);
    const cplx end = integrate_mean_field(d, det, [&](double) { return p.beta; }, target * 0.8, 20.0 / d.kappa_tot());
    EXPECT_LT(std::abs(end - target), 1e-5 * std::abs(target));
}

TEST(Locking, DeterministicAndThreadIndependent) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const double det = mhz(-120.0);
    const double th = std::sqrt(det * det + 0.25 * d.kappa_tot() * d.kappa_tot());
    const double es = std::abs(tone_amplitude(ToneSpec{d.omega_r + det, -89.0, 0.0}));
    const PumpSpec p{det, 1.01 * th, LockingTone{es, 0.0}};
    LockingOptions o;
    o.ramp_time = 0.25 / d.kappa_tot();
    o.hold_time = 3.0 / d.kappa_tot();
    const std::vector<double> phases{0.0, 1.0, 2.0};
    const auto a = simulate_locking(d, p, phases, 42, 60, o);
    o.threads = 3;
    const auto b = simulate_locking(d, p, phases, 42, 60, o);
    const auto c = simulate_locking(d, p, phases, 43, 60, o);
    bool any_diff = false;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        EXPECT_EQ(a[i].n_pi, b[i].n_pi);
        EXPECT_EQ(a[i].n_zero, b[i].n_zero);
        EXPECT_EQ(a[i].n_zero + a[i].n_pi + a[i].n_unclassified, 60);
        any_diff |= a[i].n_pi != c[i].n_pi;
    }
    EXPECT_TRUE(any_diff);
}

TEST(Locking, NoiselessLockingIsDeterministicPerPhase) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const double det = mhz(-120.0);
    const double es = std::abs(tone_amplitude(ToneSpec{d.omega_r + det, -89.0, 0.0}));
    const PumpSpec p{det, 1.01 * std::abs(det), LockingTone{es, 0.0}};
    LockingOptions o;
    o.ramp_time = 0.25 / d.kappa_tot();
    o.hold_time = 3.0 / d.kappa_tot();
    o.noise = 0.0;
    const std::vector<double> phases{0.3, 0.3 + std::numbers::pi};
    const auto r = simulate_locking(d, p, phases, 1, 3, o);
    // A locking phase and its opposite select opposite states.
    EXPECT_TRUE((r[0].n_pi == 3 && r[1].n_zero == 3) || (r[0].n_zero == 3 && r[1].n_pi == 3));
}

TEST(Locking, RejectsPumpWithoutOscillatingPair) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    LockingOptions o;
    o.hold_time = 1e-6;
    const std::vector<double> phases{0.0};
    EXPECT_THROW(simulate_locking(d, PumpSpec{mhz(-120.0), 0.0, std::nullopt}, phases, 1, 10, o), InvalidParameter);
    EXPECT_THROW(simulate_locking(d, PumpSpec{mhz(-120.0), mhz(130.0), std::nullopt}, phases, 1, 0, o), InvalidParameter);
}
