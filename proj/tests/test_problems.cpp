#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "xsymp/diagnostics.hpp"
#include "xsymp/problems.hpp"

using namespace xsymp;

namespace {

double norm3(const std::array<double, 3>& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

std::array<double, 3> sub3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

double kepler(const State<double>& z) {
    const double P2 = z.p[0] * z.p[0] + z.p[1] * z.p[1] + z.p[2] * z.p[2];
    const double r = std::sqrt(z.q[0] * z.q[0] + z.q[1] * z.q[1] + z.q[2] * z.q[2]);
    return P2 / 2 - 1 / r;
}

// traj1 with spin 2 moved off the pole
TrajectoryPreset off_pole_traj1() {
    TrajectoryPreset t = pn_preset("traj1_regular");
    t.params.allow_pole = false;
    t.initial.p[4] = 0.6;
    return t;
}

}  // namespace

TEST(Integrable1D, Values) {
    Integrable1D h;
    EXPECT_DOUBLE_EQ(evaluate(h, State<double>({0.0}, {-3.0})), 5.0);
    EXPECT_DOUBLE_EQ(extended_energy(h, embed(State<double>({0.0}, {-3.0}))), 10.0);
    EXPECT_DOUBLE_EQ(evaluate(h, State<double>({0.0}, {0.0})), 0.5);
    EXPECT_DOUBLE_EQ(evaluate(h, State<double>({1.0}, {1.0})), 2.0);
}

TEST(Spins, FromCanonical) {
    const std::array<double, 2> th{0.0, 0.0}, xi{0.0, 0.0}, La{0.3, 0.7};
    const auto [S1, S2] = spin_from_canonical(th, xi, La);
    EXPECT_DOUBLE_EQ(S1[0], 0.3);
    EXPECT_DOUBLE_EQ(S1[1], 0.0);
    EXPECT_DOUBLE_EQ(S2[0], 0.7);
    EXPECT_DOUBLE_EQ(S2[2], 0.0);

    const auto t1 = pn_preset("traj1");
    const auto [A, B] = PNBinary(t1.params).spins(t1.initial);
    EXPECT_NEAR(std::hypot(A[0], A[1]), std::sqrt(0.0479 * 0.0479 - 0.0445 * 0.0445), 1e-15);
    EXPECT_NEAR(std::hypot(A[0], A[1]), 0.0177242, 5e-7);
    EXPECT_EQ(B[0], 0.0);
    EXPECT_EQ(B[2], 0.6104);
}

TEST(Spins, NormEqualsMagnitude) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1, 1), L(0.01, 2.0);
    for (int i = 0; i < 200; ++i) {
        const std::array<double, 2> La{L(gen), L(gen)};
        const std::array<double, 2> xi{0.999 * La[0] * u(gen), 0.999 * La[1] * u(gen)};
        const std::array<double, 2> th{3 * u(gen), 3 * u(gen)};
        const auto [S1, S2] = spin_from_canonical(th, xi, La);
        EXPECT_NEAR(norm3(S1) - La[0], 0.0, 1e-15);
        EXPECT_NEAR(norm3(S2) - La[1], 0.0, 1e-15);
    }
}

TEST(Spins, DomainErrors) {
    const std::array<double, 2> th{0.0, 0.0}, La{0.3, 0.7};
    EXPECT_THROW(spin_from_canonical(th, std::array<double, 2>{0.31, 0.0}, La), DomainError);
    EXPECT_THROW(spin_from_canonical(th, std::array<double, 2>{0.0, 0.7}, La), DomainError);
    EXPECT_NO_THROW(spin_from_canonical(th, std::array<double, 2>{0.0, 0.7}, La, true));
    try {
        spin_from_canonical(th, std::array<double, 2>{0.0, -0.8}, La, true);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.coordinate(), 4);
    }
}

TEST(PN, Eta) {
    PNParams a;
    a.beta = 1.0;
    EXPECT_DOUBLE_EQ(PNBinary(a).eta(), 0.25);
    a.beta = 0.28;
    EXPECT_NEAR(PNBinary(a).eta(), 0.1708984, 1e-7);
}

TEST(PN, NewtonianTerm) {
    auto t2 = pn_preset("traj2_chaotic");
    t2.params.terms = PNTerms::newtonian();
    EXPECT_NEAR(evaluate(PNBinary(t2.params), t2.initial), 0.125 - 1 / 8.31, 1e-15);
    EXPECT_NEAR(evaluate(PNBinary(t2.params), t2.initial), 0.0046631, 1e-7);
}

TEST(PN, LargeCLimitIsKepler) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(-1, 1);
    auto prm = off_pole_traj1().params;
    PNParams gated = prm;
    gated.terms = PNTerms::newtonian();
    prm.c = 1e8;
    for (int i = 0; i < 20; ++i) {
        const State<double> z({0.2 * u(gen), 0.2 * u(gen), 0.1 * u(gen), 0.04 * u(gen), 0.5 * u(gen)},
                              {10 + u(gen), 5 * u(gen), u(gen), 3 * u(gen), 3 * u(gen)});
        EXPECT_NEAR(evaluate(PNBinary(gated), z), kepler(z), 1e-15);
        EXPECT_NEAR(evaluate(PNBinary(prm), z), kepler(z), 1e-12);
    }
}

TEST(PN, EachTermContributes) {
    const auto t = off_pole_traj1();
    const double full = evaluate(PNBinary(t.params), t.initial);
    for (int k = 0; k < 4; ++k) {
        PNParams p = t.params;
        bool* flag[] = {&p.terms.pn1, &p.terms.pn2, &p.terms.spin_orbit, &p.terms.spin_spin};
        *flag[k] = false;
        EXPECT_NE(evaluate(PNBinary(p), t.initial), full) << "term " << k;
    }
}

TEST(PN, OriginIsDomainError) {
    const auto t = off_pole_traj1();
    State<double> z = t.initial;
    z.q[0] = z.q[1] = z.q[2] = 0.0;
    EXPECT_THROW(evaluate(PNBinary(t.params), z), DomainError);
    EXPECT_THROW(grad(PNBinary(t.params), z), DomainError);
}

TEST(PN, GradientMatchesFiniteDifferences) {
    const auto t = off_pole_traj1();
    const PNBinary H(t.params);
    const auto g = grad(H, t.initial);
    for (std::size_t k = 0; k < 5; ++k) {
        for (int side = 0; side < 2; ++side) {
            State<double> a = t.initial, b = t.initial;
            double& ua = side ? a.q[k] : a.p[k];
            double& ub = side ? b.q[k] : b.p[k];
            const double step = 1e-6;
            ua += step;
            ub -= step;
            const double fd = (evaluate(H, a) - evaluate(H, b)) / (2 * step);
            EXPECT_NEAR(side ? g.dHdq[k] : g.dHdp[k], fd, 1e-8) << "side " << side << " k " << k;
        }
    }
}

TEST(PN, AngularMomentum) {
    PNParams none;
    none.beta = 0.28;
    none.c = std::sqrt(10.0);
    const PNBinary H(none);
    const auto J = H.total_angular_momentum(PNBinary::make_state({25.34, 0, 0}, {0, 0.18, 0}, {0, 0}, {0, 0}));
    EXPECT_NEAR(J[0], 0.0, 1e-15);
    EXPECT_NEAR(J[1], 0.0, 1e-15);
    EXPECT_NEAR(J[2], 4.5612, 1e-12);
    const auto J2 = H.total_angular_momentum(PNBinary::make_state({3, -4, 0}, {0.1, 0.3, 0}, {0, 0}, {0, 0}));
    EXPECT_EQ(J2[0], 0.0);
    EXPECT_EQ(J2[1], 0.0);
    EXPECT_NE(J2[2], 0.0);
}

TEST(PN, AngularMomentumConservedOffPole) {
    const auto t = off_pole_traj1();
    const PNBinary H(t.params);
    const auto J0 = H.total_angular_momentum(t.initial);
    State<double> z = t.initial;
    double worst = 0.0, spin_err = 0.0;
    for (int n = 0; n < 1000; ++n) {
        z = gauss4_step(H, z, 0.1, 1e-14, 100).state;
        worst = std::max(worst, norm3(sub3(H.total_angular_momentum(z), J0)));
        const auto [S1, S2] = H.spins(z);
        spin_err = std::max({spin_err, std::abs(norm3(S1) - t.params.Lambda1), std::abs(norm3(S2) - t.params.Lambda2)});
    }
    EXPECT_LT(worst, 1e-8);
    EXPECT_LT(spin_err, 1e-12);
}

TEST(PN, PresetAtPoleKeepsJz) {
    // with spin 2 frozen on the pole only the z component is a first integral
    const auto t = pn_preset("traj1_regular");
    const PNBinary H(t.params);
    const auto J0 = H.total_angular_momentum(t.initial);
    State<double> z = t.initial;
    double dz = 0.0;
    for (int n = 0; n < 1000; ++n) {
        z = gauss4_step(H, z, 0.1, 1e-14, 100).state;
        dz = std::max(dz, std::abs(H.total_angular_momentum(z)[2] - J0[2]));
        ASSERT_EQ(z.p[4], t.params.Lambda2);
    }
    EXPECT_LT(dz, 1e-10);
}

TEST(PN, PresetsAndOverrides) {
    EXPECT_THROW(pn_preset("traj3"), ConfigError);
    const auto t2 = pn_preset("traj2");
    EXPECT_EQ(t2.params.beta, 1.0);
    EXPECT_EQ(t2.initial.q[0], 8.31);
    EXPECT_EQ(t2.initial.p[3], -0.2459);
    PNParams bad;
    bad.beta = 0.0;
    EXPECT_THROW(PNBinary{bad}, ConfigError);
}

TEST(Reference, ZeroGridReturnsInitial) {
    Integrable1D h;
    const auto s0 = Integrable1D::default_initial();
    const auto r = reference_solution(h, s0, 0.01, {0});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], s0);
}

TEST(Reference, Problem1EnergyConserved) {
    Integrable1D h;
    const auto s0 = Integrable1D::default_initial();
    ReferenceOptions opt;
    opt.cross_validate = false;
    const auto r = reference_for_run(h, s0, 0.05, 20000, 200, opt);
    double worst = 0.0;
    for (const auto& s : r) worst = std::max(worst, energy_error(h, s, s0));
    EXPECT_LT(worst, 1e-11);
    EXPECT_EQ(r.size(), 100u);
}

TEST(Reference, CrossValidationAgreesOnProblem1) {
    Integrable1D h;
    EXPECT_NO_THROW(reference_for_run(h, Integrable1D::default_initial(), 0.01, 1000, 100));
}

TEST(Reference, ChaoticTrajectoryLosesAgreement) {
    const auto t = pn_preset("traj2_chaotic");
    const PNBinary H(t.params);
    ReferenceOptions opt;
    opt.fine_factor = 20;
    opt.check_factor = 40;
    opt.agreement = 1e-8;
    try {
        reference_for_run(H, t.initial, 1.0, 5000, 10, opt);
        FAIL() << "expected ReferenceUnreliable";
    } catch (const ReferenceUnreliable& e) {
        EXPECT_GT(e.first_failing_t(), 100.0);
        EXPECT_LT(e.first_failing_t(), 5000.0);
        EXPECT_GT(e.disagreement(), 1e-8);
    }
}
