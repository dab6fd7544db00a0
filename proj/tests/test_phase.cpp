#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "xsymp/phase.hpp"

using namespace xsymp;

namespace {

ExtendedState<double> ext1(double p, double x, double q, double y) { return ExtendedState<double>({p}, {x}, {q}, {y}); }

Eigen::Vector4d v4(double a, double b, double c, double d) { return Eigen::Vector4d(a, b, c, d); }

}  // namespace

TEST(Embed, CopiesCoordinates) {
    EXPECT_EQ(embed(State<double>({0.0}, {-3.0})), ext1(0, 0, -3, -3));
    EXPECT_EQ(embed(State<double>(2)), ExtendedState<double>(2));
    const auto e = embed(State<double>({1, 2}, {3, 4}));
    EXPECT_EQ(e, ExtendedState<double>({1, 2}, {1, 2}, {3, 4}, {3, 4}));
}

TEST(Discrepancy, HandValues) {
    EXPECT_EQ(discrepancy(embed(State<double>({1.3, -2}, {0.1, 9}))), 0.0);
    EXPECT_DOUBLE_EQ(discrepancy(ext1(1, 0, 0, 0)), 1.0);
    EXPECT_DOUBLE_EQ(discrepancy(ext1(1, 0, 3, -1)), std::sqrt(17.0));
}

TEST(SingleFactor, Examples) {
    const auto e = ext1(1.25, -7, 3.5, 2);
    const auto s = project_single_factor(e, {1.0, 0.3});
    EXPECT_EQ(s.p[0], 1.25);
    EXPECT_EQ(s.q[0], 3.5);
    const auto m = project_single_factor(ext1(2, 4, 0, 0), {0.5, 0.5});
    EXPECT_DOUBLE_EQ(m.p[0], 3.0);
    EXPECT_DOUBLE_EQ(m.q[0], 0.0);
    const auto r = project_single_factor(ext1(1, 0, 0, 1), {1 / std::numbers::e, 1 / std::numbers::pi});
    EXPECT_NEAR(r.p[0], 0.367879, 1e-6);
    EXPECT_NEAR(r.q[0], 0.632121, 1e-6);
}

TEST(DoubleFactor, Branches) {
    const auto e = ext1(5, 7, 2, 9);
    EXPECT_EQ(project_double_factor(e, {1.0, 0.0}, 1), State<double>({5}, {9}));
    EXPECT_EQ(project_double_factor(e, {1.0, 0.0}, 2), State<double>({7}, {2}));
}

TEST(DoubleFactor, EqualFactorsReduceToSingle) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (std::size_t n = 1; n < 20; ++n) {
        const auto e = ext1(u(gen), u(gen), u(gen), u(gen));
        const FactorPair f{0.37, 0.37};
        EXPECT_EQ(project_double_factor(e, f, n), project_single_factor(e, f));
    }
}

TEST(DoubleFactor, IdentityOnManifold) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 50; ++i) {
        const State<double> s({u(gen), u(gen)}, {u(gen), u(gen)});
        const auto e = embed(s);
        EXPECT_EQ(project_double_factor(e, {1.0, 0.0}, 1), s);
        EXPECT_EQ(project_double_factor(e, {1.0, 0.0}, 2), s);
        EXPECT_EQ(project_double_factor(e, {0.2752, 0.0731}, 7), s);
        EXPECT_EQ(discrepancy(embed(s)), 0.0);
    }
}

TEST(Weighted, Examples) {
    const auto e = ext1(1, 0, 1, 0);
    const auto s = project_weighted(e, {{0.6657}, {0.4910}}, ProjectionMode::standard);
    EXPECT_DOUBLE_EQ(s.p[0], 0.6657);
    EXPECT_DOUBLE_EQ(s.q[0], 0.4910);

    const auto d1 = project_weighted(ext1(1, -1, 0, 0), {{0.5}, {0.25}}, ProjectionMode::definition1);
    EXPECT_DOUBLE_EQ(d1.p[0], -0.5);
    EXPECT_DOUBLE_EQ(d1.q[0], 0.0);

    // no fallback when (P, Q) != 0
    const auto d2 = project_weighted(ext1(1, 3, 2, 0), {{0.5}, {0.25}}, ProjectionMode::definition1);
    EXPECT_DOUBLE_EQ(d2.p[0], 2.0);
    EXPECT_DOUBLE_EQ(d2.q[0], 1.0);
}

TEST(Weighted, EqualWeightsMatchSingleFactorPerComponent) {
    const ExtendedState<double> e({1, 2}, {3, -4}, {0.5, 6}, {7, 8});
    const auto s = project_weighted(e, {{0.3, 0.8}, {0.3, 0.8}}, ProjectionMode::standard);
    for (std::size_t k = 0; k < 2; ++k) {
        const double w = k == 0 ? 0.3 : 0.8;
        const auto ref = project_single_factor(ExtendedState<double>({e.p[k]}, {e.x[k]}, {e.q[k]}, {e.y[k]}), {w, w});
        EXPECT_EQ(s.p[k], ref.p[0]);
        EXPECT_EQ(s.q[k], ref.q[0]);
    }
}

TEST(Weighted, Definition1Validation) {
    const auto e = ext1(1, 2, 3, 4);
    EXPECT_THROW(project_weighted(e, {{0.5}, {0.5}}, ProjectionMode::definition1), ConfigError);
    EXPECT_THROW(project_weighted(e, {{1.5}, {0.5}}, ProjectionMode::definition1), ConfigError);
    EXPECT_THROW(project_weighted(e, {{0.0}, {0.5}}, ProjectionMode::definition1), ConfigError);
    EXPECT_THROW(project_weighted(e, {{0.2, 0.3}, {0.5}}, ProjectionMode::standard), ConfigError);
    EXPECT_NO_THROW(project_weighted(e, {{1.5}, {-2.0}}, ProjectionMode::standard));
}

TEST(Theorem2, ZeroStateGivesIdentity) {
    const auto r = weighted_projection_matrix(ExtendedState<double>(2), {{0.3, 0.9}, {0.1, 0.4}});
    EXPECT_TRUE(r.M.isApprox(Eigen::MatrixXd::Identity(8, 8)));
    EXPECT_EQ(r.case_counts[3], 2);
}

TEST(Theorem2, CaseOneHandMatrix) {
    const auto r = weighted_projection_matrix(ext1(1, 0, 1, 0), {{0.5}, {0.5}});
    ASSERT_EQ(r.cases[0], ComponentCase::both_nonzero);
    // a = f = 0 gives e = 0.5, d = -0.5, b = -1, c = 2; M = U V
    Eigen::Matrix4d U = Eigen::Matrix4d::Identity(), V = Eigen::Matrix4d::Identity();
    V(2, 0) = -0.5;
    V(2, 1) = 0.5;
    V(3, 0) = 0.5;
    V(3, 1) = 0.0;
    U(0, 2) = 0.0;
    U(0, 3) = -1.0;
    U(1, 2) = -1.0;
    U(1, 3) = 2.0;
    const Eigen::Matrix4d expected = U * V;
    EXPECT_LT((r.M - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((r.M * v4(1, 0, 1, 0) - v4(0.5, 0.5, 0.5, 0.5)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(symplectic_residual(r.M), 1e-15);
}

TEST(Theorem2, CaseTwoHandMatrix) {
    const auto r = weighted_projection_matrix(ext1(0, 0, 1, 0), {{0.3}, {0.5}});
    ASSERT_EQ(r.cases[0], ComponentCase::momenta_zero);
    // T = [[a, b], [c, d]] = [[0.5, 0], [0.5, 1]] acts on (q, y)
    EXPECT_DOUBLE_EQ(r.M(2, 2), 0.5);
    EXPECT_DOUBLE_EQ(r.M(2, 3), 0.0);
    EXPECT_DOUBLE_EQ(r.M(3, 2), 0.5);
    EXPECT_DOUBLE_EQ(r.M(3, 3), 1.0);
    EXPECT_LT((r.M * v4(0, 0, 1, 0) - v4(0, 0, 0.5, 0.5)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(symplectic_residual(r.M), 1e-15);
}

TEST(Theorem2, CaseThree) {
    const auto r = weighted_projection_matrix(ext1(2, -1, 0, 0), {{0.25}, {0.9}});
    ASSERT_EQ(r.cases[0], ComponentCase::positions_zero);
    const double pt = 0.25 * 2 + 0.75 * -1;
    EXPECT_LT((r.M * v4(2, -1, 0, 0) - v4(pt, pt, 0, 0)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(symplectic_residual(r.M), 1e-14);
}

TEST(Theorem2, InfeasibleTargetNamesComponent) {
    // component 1: p~ = 0.5*1 + 0.5*(-1) = 0 and q~ = 0
    const ExtendedState<double> e({1, 1}, {2, -1}, {1, 0}, {0, 0});
    try {
        weighted_projection_matrix(e, {{0.5, 0.5}, {0.5, 0.5}});
        FAIL() << "expected DomainError";
    } catch (const DomainError& err) {
        EXPECT_EQ(err.coordinate(), 1);
        EXPECT_NE(std::string(err.what()).find("weights infeasible"), std::string::npos);
    }
}

TEST(Theorem2, RandomInstances) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(-2, 2), w(0.01, 0.99);
    std::bernoulli_distribution zero(0.25);
    std::array<int, 4> coverage{};
    for (int i = 0; i < 1000; ++i) {
        const std::size_t d = 1 + i % 3;
        ExtendedState<double> e(d);
        WeightVectors wv{std::vector<double>(d), std::vector<double>(d)};
        for (std::size_t k = 0; k < d; ++k) {
            const bool zp = zero(gen), zq = zero(gen);
            e.p[k] = zp ? 0 : u(gen);
            e.x[k] = zp ? 0 : u(gen);
            e.q[k] = zq ? 0 : u(gen);
            e.y[k] = zq ? 0 : u(gen);
            do {
                wv.lambda[k] = w(gen);
                wv.xi[k] = w(gen);
            } while (wv.lambda[k] == wv.xi[k]);
        }
        const auto r = weighted_projection_matrix(e, wv);
        for (int c = 0; c < 4; ++c) coverage[c] += r.case_counts[c];
        EXPECT_LT(symplectic_residual(r.M), 1e-10);
        const State<double> target = project_weighted(e, wv, ProjectionMode::standard);
        const Eigen::VectorXd img = r.M * flatten(e);
        const Eigen::VectorXd want = flatten(ExtendedState<double>(target.p, target.p, target.q, target.q));
        EXPECT_LT((img - want).cwiseAbs().maxCoeff(), 1e-12);
    }
    for (int c = 0; c < 4; ++c) EXPECT_GT(coverage[c], 0) << "case " << c;
}
