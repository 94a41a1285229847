#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sthdg/cases.hpp"
#include "sthdg/errors.hpp"
#include "sthdg/problem.hpp"

using namespace sthdg;

TEST(Pulse, Beta)
{
    const auto c = rotating_pulse(1e-2);
    EXPECT_EQ(c.problem.beta(0.3, Vec2(0, 0)), Vec3(1, 0, 0));
    EXPECT_LT((c.problem.beta(0.7, Vec2(0.5, 0)) - Vec3(1, 0, 2)).norm(), 1e-15);
    EXPECT_LT(sample_divergence(c.problem, 100, 3), 1e-10);
}

TEST(Pulse, ExactValues)
{
    const auto c = rotating_pulse(1e-2);
    EXPECT_NEAR(c.problem.exact(0.0, Vec2(-0.2, 0.1)), 1.0, 1e-15);
    EXPECT_NEAR(c.problem.exact(0.0, Vec2(-0.2, 0.2)), std::exp(-0.5), 1e-15);
}

TEST(Pulse, RotationInvariance)
{
    const double eps = 1e-2, sigma = 0.1;
    const auto c = rotating_pulse(eps);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-0.4, 0.4), ut(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double t = ut(rng);
        const Vec2 y(u(rng), u(rng));
        const double a = 4 * t;
        const Vec2 x(std::cos(a) * y[0] - std::sin(a) * y[1], std::sin(a) * y[0] + std::cos(a) * y[1]);
        const double r2 = (y - Vec2(-0.2, 0.1)).squaredNorm();
        const double radial = sigma * sigma / (sigma * sigma + 2 * eps * t) *
                              std::exp(-r2 / (2 * sigma * sigma + 4 * eps * t));
        EXPECT_NEAR(c.problem.exact(t, x), radial, 1e-13);
    }
}

TEST(Pulse, PdeResidual)
{
    for (double eps : {1e-8, 1e-2, 0.25}) {
        const auto c = rotating_pulse(eps);
        EXPECT_LT(sample_pde_residual(c.problem, 1000, 5, 1e-4), 1e-4) << eps;
    }
}

TEST(Pulse, GradientMatchesFiniteDifferences)
{
    const auto c = rotating_pulse(0.05);
    const double s = 1e-6;
    for (const auto& [t, x] : {std::pair{0.2, Vec2(-0.1, 0.15)}, std::pair{0.8, Vec2(0.2, -0.3)}}) {
        const Vec3 g = c.problem.exact_grad(t, x);
        const auto& u = c.problem.exact;
        EXPECT_NEAR(g[0], (u(t + s, x) - u(t - s, x)) / (2 * s), 1e-6);
        EXPECT_NEAR(g[1], (u(t, x + Vec2(s, 0)) - u(t, x - Vec2(s, 0))) / (2 * s), 1e-6);
        EXPECT_NEAR(g[2], (u(t, x + Vec2(0, s)) - u(t, x - Vec2(0, s))) / (2 * s), 1e-6);
    }
}

TEST(Neumann, InitialAndFinalTime)
{
    const auto c = rotating_pulse(1e-2);
    BoundaryPoint p;
    p.t = 0.0;
    p.x = Vec2(-0.2, 0.1);
    p.normal = Vec3(-1, 0, 0);
    EXPECT_NEAR(c.problem.neumann_data(p), 1.0, 1e-15);
    p.t = 1.0;
    p.x = Vec2(0.1, 0.1);
    p.normal = Vec3(1, 0, 0);
    EXPECT_EQ(c.problem.neumann_data(p), 0.0);
}

TEST(Neumann, LateralInflowPoint)
{
    const double eps = 1e-2;
    const auto c = rotating_pulse(eps);
    BoundaryPoint p;
    p.t = 0.4;
    p.x = Vec2(-0.5, -0.3);
    p.normal = Vec3(0, -1, 0);
    p.side = 0;
    const double bn = c.problem.beta(p.t, p.x).dot(p.normal);
    ASSERT_LT(bn, 0.0); // inflow
    const double u = c.problem.exact(p.t, p.x);
    const double ux = c.problem.exact_grad(p.t, p.x)[1];
    EXPECT_NEAR(c.problem.neumann_data(p), -u * bn - eps * ux, 1e-15);
    // outflow side: no advective term
    p.x = Vec2(-0.5, 0.3);
    ASSERT_GT(c.problem.beta(p.t, p.x).dot(p.normal), 0.0);
    EXPECT_NEAR(c.problem.neumann_data(p), -eps * c.problem.exact_grad(p.t, p.x)[1], 1e-15);
}

TEST(Neumann, Errors)
{
    auto c = rotating_pulse(1e-2);
    c.problem.partition.dirichlet[1] = true;
    BoundaryPoint p;
    p.side = 1;
    p.normal = Vec3(0, 1, 0);
    EXPECT_THROW(c.problem.neumann_data(p), ContractError);
    ProblemSpec bare;
    bare.name = "bare";
    p.side = 0;
    EXPECT_THROW(bare.neumann_data(p), ConfigurationError);
}

TEST(Zeta, TieIsOutflow)
{
    EXPECT_EQ(zeta_minus(0.0), 0.0);
    EXPECT_EQ(zeta_plus(0.0), 1.0);
    EXPECT_EQ(zeta_minus(-1e-300), 1.0);
}

TEST(Cases, RegisteredCasesSolveTheirPde)
{
    for (const auto& name : case_names()) {
        const auto c = make_case(name, 0.1, 2, 2, BetaChoice::rotating);
        if (!c.problem.exact)
            continue;
        EXPECT_LT(sample_pde_residual(c.problem, 200, 2, 1e-4), 1e-5) << name;
        EXPECT_LT(sample_divergence(c.problem, 100, 2), 1e-10) << name;
    }
    EXPECT_THROW(make_case("nope", 0.1, 1, 1), ConfigurationError);
    EXPECT_THROW(rotating_pulse(0.0), ConfigurationError);
}

TEST(Cases, PolynomialField)
{
    PolynomialField u{{{1, 1, 1}}, {1.0}}; // t x1 x2
    EXPECT_NEAR(u.value(2, Vec2(3, 5)), 30, 1e-14);
    EXPECT_LT((u.gradient(2, Vec2(3, 5)) - Vec3(15, 10, 6)).norm(), 1e-14);
    EXPECT_EQ(u.laplacian(2, Vec2(3, 5)), 0.0);
    const auto c = manufactured(u, 0.1, BetaChoice::constant);
    EXPECT_LT(sample_pde_residual(c.problem, 100, 1, 1e-4), 1e-6);
}

TEST(Cases, RingSubset)
{
    int marked = 0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            marked += ring_predicate(Vec2(-0.45 + 0.1 * i, -0.45 + 0.1 * j));
    EXPECT_GT(marked, 0);
    EXPECT_LT(marked, 100);
}
