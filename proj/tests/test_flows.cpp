#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "xsymp/flows.hpp"
#include "xsymp/problems.hpp"

using namespace xsymp;

namespace {

ExtendedState<double> ext1(double p, double x, double q, double y) { return ExtendedState<double>({p}, {x}, {q}, {y}); }

void expect_near(const ExtendedState<double>& a, const ExtendedState<double>& b, double tol) {
    ASSERT_EQ(a.dim(), b.dim());
    for (std::size_t k = 0; k < a.dim(); ++k) {
        EXPECT_NEAR(a.p[k], b.p[k], tol);
        EXPECT_NEAR(a.x[k], b.x[k], tol);
        EXPECT_NEAR(a.q[k], b.q[k], tol);
        EXPECT_NEAR(a.y[k], b.y[k], tol);
    }
}

Eigen::VectorXd to_vec(const ExtendedState<double>& e) { return flatten(e); }

ExtendedState<double> from_vec(const Eigen::VectorXd& v) {
    const std::size_t d = static_cast<std::size_t>(v.size() / 4);
    ExtendedState<double> e(d);
    for (std::size_t k = 0; k < d; ++k) {
        e.p[k] = v(k);
        e.x[k] = v(d + k);
        e.q[k] = v(2 * d + k);
        e.y[k] = v(3 * d + k);
    }
    return e;
}

template <class F>
double symplectic_defect_fd(F f, const ExtendedState<double>& e0) {
    const Eigen::VectorXd z = to_vec(e0);
    const auto n = z.size();
    Eigen::MatrixXd M(n, n);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd a = z, b = z;
        a(j) += h;
        b(j) -= h;
        M.col(j) = (to_vec(f(from_vec(a))) - to_vec(f(from_vec(b)))) / (2 * h);
    }
    // (p, x, q, y): momenta (p, x) first, positions (q, y) second
    return symplectic_residual(M);
}

}  // namespace

TEST(FlowA, HandExample) {
    Integrable1D h;
    expect_near(flow_A(h, ext1(0, 0, -3, -3), 0.5), ext1(0, 1.5, -3, -3), 1e-15);
    const auto e = ext1(0.3, -1, 2, 0.7);
    EXPECT_EQ(flow_A(h, e, 0.0), e);
}

TEST(FlowB, HandExample) {
    Integrable1D h;
    expect_near(flow_B(h, ext1(0, 1.5, -3, -3), 0.5), ext1(4.875, 1.5, -3, 4.5), 1e-14);
    const auto e = ext1(0.3, -1, 2, 0.7);
    EXPECT_EQ(flow_B(h, e, 0.0), e);
}

TEST(FlowAB, SemigroupAndEnergy) {
    Integrable1D h;
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 20; ++i) {
        const auto e = ext1(u(gen), u(gen), u(gen), u(gen));
        expect_near(flow_A(h, flow_A(h, e, 0.2), 0.3), flow_A(h, e, 0.5), 1e-13);
        expect_near(flow_B(h, flow_B(h, e, 0.2), 0.3), flow_B(h, e, 0.5), 1e-13);
        EXPECT_NEAR(energy_A(h, flow_A(h, e, 0.7)), energy_A(h, e), 1e-14);
        EXPECT_NEAR(energy_B(h, flow_B(h, e, 0.7)), energy_B(h, e), 1e-14);
    }
}

TEST(FlowAB, SymplecticJacobian) {
    Integrable1D h;
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 50; ++i) {
        const auto e = ext1(u(gen), u(gen), u(gen), u(gen));
        EXPECT_LT(symplectic_defect_fd([&](const auto& s) { return flow_A(h, s, 0.1); }, e), 1e-5);
        EXPECT_LT(symplectic_defect_fd([&](const auto& s) { return flow_B(h, s, 0.1); }, e), 1e-5);
        EXPECT_LT(symplectic_defect_fd([&](const auto& s) { return flow_C(s, MixingStrength(3.0), 0.1); }, e), 1e-5);
    }
}

TEST(FlowC, ManifoldAndZeroOmegaFixed) {
    const auto on = ext1(0.4, 0.4, -1, -1);
    EXPECT_EQ(flow_C(on, MixingStrength(5.0), 0.37), on);
    const auto off = ext1(0.4, 1, -1, 2);
    EXPECT_EQ(flow_C(off, MixingStrength(0.0), 0.37), off);
    EXPECT_THROW(MixingStrength(-1.0), ConfigError);
}

TEST(FlowC, QuarterTurn) {
    // delta = (1, 0), 2 omega t = pi/2 -> delta = (0, 1); sums unchanged
    const double w = 2.0, t = std::numbers::pi / 8;
    const auto e = flow_C(ext1(0.5, -0.5, 0, 0), MixingStrength(w), t);
    EXPECT_NEAR(e.p[0] - e.x[0], 0.0, 1e-15);
    EXPECT_NEAR(e.q[0] - e.y[0], 1.0, 1e-15);
    EXPECT_NEAR(e.p[0] + e.x[0], 0.0, 1e-15);
    EXPECT_NEAR(e.q[0] + e.y[0], 0.0, 1e-15);
}

TEST(FlowC, MatchesIntegratedLinearSystem) {
    // Hamilton's equations of omega/2 (|p-x|^2 + |q-y|^2) with RK4 at a tiny step
    const double w = 1.7, T = 0.9;
    const auto e0 = ext1(0.3, -1.2, 0.8, 2.1);
    auto rhs = [w](const Eigen::Vector4d& z) {
        const double dp = z(0) - z(1), dq = z(2) - z(3);
        // z = (p, x, q, y); dp/dt = -dG/dq, dq/dt = dG/dp
        return Eigen::Vector4d(-w * dq, w * dq, w * dp, -w * dp);
    };
    Eigen::Vector4d z(e0.p[0], e0.x[0], e0.q[0], e0.y[0]);
    const int n = 20000;
    const double h = T / n;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector4d k1 = rhs(z), k2 = rhs(z + h / 2 * k1), k3 = rhs(z + h / 2 * k2), k4 = rhs(z + h * k3);
        z += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const auto e = flow_C(e0, MixingStrength(w), T);
    EXPECT_NEAR(e.p[0], z(0), 1e-10);
    EXPECT_NEAR(e.x[0], z(1), 1e-10);
    EXPECT_NEAR(e.q[0], z(2), 1e-10);
    EXPECT_NEAR(e.y[0], z(3), 1e-10);
}

TEST(FlowC, PreservesDiscrepancyAndSums) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 50; ++i) {
        const ExtendedState<double> e({u(gen), u(gen)}, {u(gen), u(gen)}, {u(gen), u(gen)}, {u(gen), u(gen)});
        const auto f = flow_C(e, MixingStrength(u(gen) + 3), u(gen));
        EXPECT_NEAR(discrepancy(f), discrepancy(e), 1e-12);
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_NEAR(f.p[k] + f.x[k], e.p[k] + e.x[k], 1e-14);
            EXPECT_NEAR(f.q[k] + f.y[k], e.q[k] + e.y[k], 1e-14);
        }
    }
}

TEST(ExtendedEnergy, OnManifoldIsTwiceH) {
    Integrable1D h;
    const State<double> s({0.7}, {-1.3});
    EXPECT_NEAR(extended_energy(h, embed(s), MixingStrength(4.0)), 2 * evaluate(h, s), 1e-15);
    const auto e = ext1(1, 0, 0, 0);
    EXPECT_NEAR(extended_energy(h, e, MixingStrength(2.0)), 1.0 + 0.5 + 1.0, 1e-15);
}

TEST(Doubled, GradientMatchesFlowRates) {
    Integrable1D h;
    const DoubledHamiltonian<Integrable1D> D(h);
    const auto e = ext1(0.2, -0.4, 1.1, 0.5);
    const auto g = grad(D, as_doubled_state(e));
    // P = (p, x), Q = (q, y); the pieces are H(p, y) and H(x, q)
    const auto gA = grad(h, State<double>({0.2}, {0.5}));
    const auto gB = grad(h, State<double>({-0.4}, {1.1}));
    EXPECT_NEAR(g.dHdp[0], gA.dHdp[0], 1e-15);
    EXPECT_NEAR(g.dHdp[1], gB.dHdp[0], 1e-15);
    EXPECT_NEAR(g.dHdq[0], gB.dHdq[0], 1e-15);
    EXPECT_NEAR(g.dHdq[1], gA.dHdq[0], 1e-15);
    EXPECT_EQ(from_doubled_state(as_doubled_state(e)), e);
}
