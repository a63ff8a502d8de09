#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <fracmanifold/counterexample.hpp>

#include "oracles/ml_oracle.hpp"

using namespace fracmanifold;

TEST(Counterexample, SystemIsHyperbolicForEveryOrder) {
    for (double a = 0.1; a < 0.95; a += 0.1) {
        const auto sys = build_example_system(a);
        const auto rep = check_hyperbolicity(sys.A, a);
        EXPECT_EQ(rep.unstable_count, 1);
        EXPECT_NEAR(rep.eigenvalues[0].value.real(), 2.0, 1e-14);
        EXPECT_NEAR(rep.eigenvalues[1].value.real(), -2.0, 1e-14);
        EXPECT_EQ(sys.f.min_degree(), 2);
    }
}

TEST(Counterexample, BScalar) {
    EXPECT_NEAR(deshpande_B_scalar(0.5, 2.0, -1.0), 2.0 * std::exp(-4.0), 1e-16);
    EXPECT_NEAR(deshpande_B_scalar(0.5, 2.0, -1.0), 0.0366, 1e-4);
}

TEST(Counterexample, ZeroCandidateGivesZero) {
    const Candidate zero{[](double) { return Eigen::Vector2d(0.0, 0.0); }, {}};
    for (double t : {1.0, 5.0, 10.0}) EXPECT_EQ(deshpande_unstable_projection(zero, 0.5, t).value, 0.0);
}

TEST(Counterexample, ProjectionDivergesForDifferentCandidates) {
    const Candidate other{[](double t) { return Eigen::Vector2d(0.1 / (1.0 + t), 0.05 * std::exp(-t)); }, {}};
    for (const auto& phi : {analytic_candidate(0.5, 0.05), other}) {
        const auto p5 = deshpande_unstable_projection(phi, 0.5, 5.0);
        const auto p10 = deshpande_unstable_projection(phi, 0.5, 10.0);
        const auto p15 = deshpande_unstable_projection(phi, 0.5, 15.0);
        EXPECT_GT(std::abs(p10.value), 10.0 * std::abs(p5.value));
        EXPECT_GT(std::abs(p15.value), std::abs(p10.value));
        EXPECT_GT(std::abs(p15.value), 1e3);
        const double limit = std::pow(2.0, 1.0) * p15.weighted_mass;
        EXPECT_NEAR(p15.bracket_ratio, limit, 0.05 * limit);
    }
}

TEST(Counterexample, WeightedMassMatchesQuadrature) {
    const Candidate phi{[](double t) { return Eigen::Vector2d(0.1 / (1.0 + t), 0.05 * std::exp(-t)); }, {}};
    boost::math::quadrature::exp_sinh<double> es;
    const double ref = es.integrate([](double s) {
        const double a = 0.1 / (1.0 + s), b = 0.05 * std::exp(-s);
        return std::exp(-4.0 * s) * (a * a + b * b);
    });
    EXPECT_NEAR(deshpande_unstable_projection(phi, 0.5, 5.0).weighted_mass, ref, 1e-9 * ref);
}

TEST(Counterexample, GapAtHalfOrder) {
    const auto g = ml_identity_gap(0.5, 2.0, 20.0);
    EXPECT_NEAR(g.entrywise_gap(1, 1), 3.0, 1e-12);
    // The leading (2,2) entry agrees with a high-precision evaluation of E_{1/2,1/2}(2 sqrt(20)).
    const oracle::SeriesOracle o(0.5, 0.5);
    const auto e = o(cplx(2.0 * std::sqrt(20.0)));
    ASSERT_TRUE(e);
    EXPECT_NEAR(e->real() * std::exp(-80.0), g.lhs(1, 1), 1e-10 * g.lhs(1, 1));
}

TEST(Counterexample, GapPersistsAcrossParameters) {
    for (double a : {0.3, 0.5, 0.8})
        for (double lam : {1.0, 2.0, 4.0}) {
            const double factor = identity_gap_factor(a, lam);
            if (std::abs(factor - 1.0) < 1e-12) continue;
            const double t = std::max(20.0, 1.01 * std::pow(5.0 / lam, 1.0 / a));
            const auto g = ml_identity_gap(a, lam, t);
            EXPECT_NEAR(g.entrywise_gap(1, 1), std::abs(factor - 1.0), 0.01 * std::abs(factor - 1.0)) << a << lam;
        }
}

TEST(Counterexample, ClassicalLimit) {
    EXPECT_EQ(ml_identity_gap(1.0, 2.0, 5.0).entrywise_gap(1, 1), 0.0);
    const double f90 = identity_gap_factor(0.9, 2.0), f99 = identity_gap_factor(0.99, 2.0);
    EXPECT_LT(std::abs(f99 - 1.0), std::abs(f90 - 1.0));
    EXPECT_LT(std::abs(f99 - 1.0), 0.02);
}

TEST(Counterexample, BelowThresholdIsDomainError) {
    EXPECT_THROW(ml_identity_gap(0.5, 2.0, 1.0), DomainError);
    EXPECT_THROW(ml_identity_gap(0.5, -2.0, 20.0), DomainError);
}

TEST(Counterexample, MatrixCrosscheck) {
    for (double t : {10.0, 20.0, 40.0}) EXPECT_NEAR(ml_identity_crosscheck(0.5, 2.0, t), 4.0, 4e-3) << t;
}

TEST(Counterexample, ReportRefutes) {
    const auto rep = counterexample_report();
    EXPECT_TRUE(rep.refutation_holds());
    EXPECT_EQ(rep.analytic.size(), 4u);
    EXPECT_EQ(rep.solver.size(), 4u);
    EXPECT_NEAR(rep.expected_gap, 3.0, 1e-12);
}
