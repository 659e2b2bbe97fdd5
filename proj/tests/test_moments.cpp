#include <random>

#include <gtest/gtest.h>

#include "kerrspec/lindblad.hpp"
#include "kerrspec/moments.hpp"
#include "cases.hpp"
#include "oracles.hpp"

using namespace kerrspec;
using testcases::Case;
using testcases::random_case;


TEST(MomentTable, OutOfRangeReadsZero) {
    MomentTable t(3);
    t.at(1, 2) = cplx(1.0, 2.0);
    EXPECT_EQ(t(1, 2), cplx(1.0, 2.0));
    EXPECT_EQ(t(4, 0), cplx{});
    EXPECT_EQ(t(-1, 0), cplx{});
}

TEST(OneTone, MatchesDenseLindbladOracle) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 20; ++i) {
        const Case c = random_case(rng);
        const auto m = converge_one_tone(c.d, c.probe, ConvergenceOptions{1e-11, 8, 48});
        ASSERT_TRUE(m.converged);
        ASSERT_LT(m.table.photon_number(), 2.0);
        const cplx ref = oracle::one_tone_gamma(c.d, c.probe.omega, tone_amplitude(c.probe), 16);
        EXPECT_LT(std::abs(m.gamma - ref), 1e-6) << "case " << i;
    }
}

TEST(OneTone, HigherMomentsMatchOracle) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        const Case c = random_case(rng, 1.0);
        const auto m = converge_one_tone(c.d, c.probe, ConvergenceOptions{1e-12, 16, 48});
        const cplx e = tone_amplitude(c.probe);
        const auto rho = oracle::steady_state(oracle::liouvillian(c.d, c.probe.omega, e, 18), 18);
        for (auto [mm, nn] : {std::pair{1, 1}, {0, 2}, {2, 1}, {2, 2}})
            EXPECT_LT(std::abs(m.table(mm, nn) - oracle::moment(rho, mm, nn)), 1e-7);
    }
}

TEST(OneTone, LibraryLindbladAgreesWithDenseOracle) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 5; ++i) {
        const Case c = random_case(rng);
        const cplx e = tone_amplitude(c.probe);
        const auto l = lindblad_steady_state(c.d, c.probe, 16);
        EXPECT_TRUE(l.cutoff_ok);
        const auto rho = oracle::steady_state(oracle::liouvillian(c.d, c.probe.omega, e, 16), 16);
        EXPECT_LT((l.rho - rho).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(OneTone, IdentityHermiticityAndPassivity) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        const Case c = random_case(rng, 3.0);
        const auto t = solve_one_tone(c.d, c.probe, 10);
        EXPECT_EQ(t(0, 0), cplx(1.0, 0.0));
        for (int m = 0; m <= 10; ++m)
            for (int n = 0; n <= 10; ++n)
                EXPECT_LT(std::abs(t(n, m) - std::conj(t(m, n))), 1e-9 * (1.0 + std::abs(t(m, n))));
        const auto g = converge_one_tone(c.d, c.probe);
        EXPECT_LE(std::abs(g.gamma), 1.0 + 1e-9);
    }
}

TEST(OneTone, ZeroKerrReducesToLinearReflection) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        Case c = random_case(rng, 50.0);
        c.d.kerr = 0.0;
        const auto g = converge_one_tone(c.d, c.probe);
        EXPECT_TRUE(g.converged);
        EXPECT_LT(std::abs(g.gamma - linear_reflection(c.d, c.probe.omega)), 1e-10);
    }
}

TEST(OneTone, ConjugationSymmetry) {
    // Gamma(-D, -K) = conj Gamma(D, K)
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        const Case c = random_case(rng, 1.0);
        DeviceParams flipped = c.d;
        flipped.kerr = -c.d.kerr;
        ToneSpec p2 = c.probe;
        p2.omega = c.d.omega_r - (c.probe.omega - c.d.omega_r);
        p2.power_dbm = amplitude_to_dbm(std::abs(tone_amplitude(c.probe)), p2.omega);
        const auto g1 = solve_one_tone(c.d, c.probe, 12);
        const auto g2 = solve_one_tone(flipped, p2, 12);
        const cplx r1 = reflection(c.d, g1, tone_amplitude(c.probe));
        const cplx r2 = reflection(flipped, g2, tone_amplitude(p2));
        EXPECT_LT(std::abs(r2 - std::conj(r1)), 1e-10);
    }
}

TEST(OneTone, LowPowerLimitIsLinear) {
    const auto d = DeviceParams::from_lab(10.015, -11.2, 0.74, 0.72);
    for (double det_mhz : {-3.0, -0.5, 0.0, 0.7}) {
        const ToneSpec p{d.omega_r + mhz(det_mhz), -190.0, 0.0};
        EXPECT_LT(std::abs(converge_one_tone(d, p).gamma - linear_reflection(d, p.omega)), 2e-5);
    }
}

TEST(OneTone, TruncationConvergesMonotonically) {
    const auto d = DeviceParams::from_lab(10.015, -11.2, 0.74, 0.72);
    const ToneSpec p{d.omega_r + mhz(-5.6), -125.0, 0.0};
    const cplx ref = reflection(d, solve_one_tone(d, p, 40), tone_amplitude(p));
    double prev = 1.0;
    for (int n : {2, 4, 8, 16}) {
        const double err = std::abs(reflection(d, solve_one_tone(d, p, n), tone_amplitude(p)) - ref);
        EXPECT_LE(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-8);
}

TEST(OneTone, RejectsInvalidInput) {
    const auto d = DeviceParams::from_lab(10.0, -1.0, 0.5, 0.5);
    EXPECT_THROW(solve_one_tone(d, ToneSpec{d.omega_r, -120.0, 0.0}, 0), InvalidParameter);
    EXPECT_THROW(reflection(d, solve_one_tone(d, ToneSpec{d.omega_r}, 4), cplx{}), InvalidParameter);
    EXPECT_THROW(converge_one_tone(d, ToneSpec{d.omega_r, -120.0, 0.0}, ConvergenceOptions{0.0, 8, 16}),
                 InvalidParameter);
}

TEST(TwoTone, MatchesLinearResponseOracle) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Case c = random_case(rng, 1.0);
        const ToneSpec drive = c.probe;
        const double k = c.d.kappa_tot();
        const double offset = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.05 + 3.0 * u(rng)) * k;
        const ToneSpec probe{drive.omega + offset, -160.0, 0.0};
        const auto r = converge_two_tone(c.d, drive, probe, ConvergenceOptions{1e-11, 8, 48});
        ASSERT_TRUE(r.converged);
        const cplx ref = oracle::two_tone_gamma(c.d, drive.omega, tone_amplitude(drive), probe.omega,
                                                tone_amplitude(probe), 16);
        EXPECT_LT(std::abs(r.gamma - ref), 1e-6) << "case " << i;
    }
}

TEST(TwoTone, VanishingDriveReducesToLinear) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const Case c = random_case(rng);
        const ToneSpec drive{c.d.omega_r, -std::numeric_limits<double>::infinity(), 0.0};
        const auto r = converge_two_tone(c.d, drive, c.probe, ConvergenceOptions{1e-10, 4, 16});
        EXPECT_LT(std::abs(r.gamma - linear_reflection(c.d, c.probe.omega)), 1e-10);
    }
}

TEST(TwoTone, ResponseIsIndependentOfProbePower) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const ToneSpec drive{d.omega_r, -132.0, 0.0};
    const cplx a = converge_two_tone(d, drive, ToneSpec{d.omega_r + mhz(-11.0), -170.0, 0.0}).gamma;
    const cplx b = converge_two_tone(d, drive, ToneSpec{d.omega_r + mhz(-11.0), -120.0, 1.0}).gamma;
    EXPECT_LT(std::abs(a - b), 1e-10);
}

TEST(TwoTone, EqualFrequenciesRejected) {
    const auto d = DeviceParams::from_lab(10.015, -11.0, 0.74, 0.72);
    const ToneSpec t{d.omega_r, -130.0, 0.0};
    EXPECT_THROW(solve_two_tone(d, t, t, 8), InvalidParameter);
}

TEST(Lindblad, CutoffFlagTracksTopPopulation) {
    const auto d = DeviceParams::from_lab(10.0, -1.0, 0.5, 0.5);
    const auto strong = lindblad_steady_state(d, ToneSpec{d.omega_r, -110.0, 0.0}, 6);
    EXPECT_FALSE(strong.cutoff_ok);
    const auto weak = lindblad_steady_state(d, ToneSpec{d.omega_r, -150.0, 0.0}, 12);
    EXPECT_TRUE(weak.cutoff_ok);
    EXPECT_NEAR(weak.rho.trace().real(), 1.0, 1e-12);
    EXPECT_LT((weak.rho - weak.rho.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
}
