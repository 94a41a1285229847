#include <cmath>

#include <gtest/gtest.h>

#include "sthdg/cases.hpp"
#include "sthdg/errors.hpp"
#include "sthdg/stability.hpp"

using namespace sthdg;

namespace {

UniformGrid grid(int n)
{
    UniformGrid g;
    g.nx = g.ny = n;
    return g;
}

std::vector<const SpaceTimeMesh*> ptrs(const std::vector<SpaceTimeMesh>& v)
{
    std::vector<const SpaceTimeMesh*> p;
    for (const auto& m : v)
        p.push_back(&m);
    return p;
}

} // namespace

TEST(Weight, Values)
{
    EXPECT_NEAR(weight_phi(0.0, 1.0, 2.0), std::exp(1.0) + 2.0, 1e-15);
    EXPECT_NEAR(weight_phi(3.0, 3.0, 2.0), 3.0 + 2.0, 1e-14);
    EXPECT_NEAR(weight_phi(0.5, 0.5, 1.0), std::exp(1.0) * std::exp(-0.5) + 1.0, 1e-15);
    EXPECT_THROW(weight_phi(0.0, 0.0, 1.0), DomainError);
}

TEST(Weight, BoundsAndSlope)
{
    for (double T : {1.0, 2.5}) {
        const WeightFunction phi{T, 10 * T};
        for (int i = 0; i < 1000; ++i) {
            const double t = T * i / 999.0;
            EXPECT_GE(phi(t), T + phi.chi - 1e-13);
            EXPECT_LE(phi(t), std::exp(1.0) * T + phi.chi + 1e-13);
            EXPECT_LE(phi.derivative(t), -1.0 + 1e-14);
            if (i > 0)
                EXPECT_LT(phi(t), phi(T * (i - 1) / 999.0));
        }
    }
}

TEST(Thresholds, Formulas)
{
    EXPECT_NEAR(chi_threshold(2.0), (std::exp(1.0) - std::sqrt(2.0)) * 2.0 / (std::sqrt(2.0) - 1.0), 1e-14);
    EXPECT_DOUBLE_EQ(alpha_threshold(3.0), 37.0);
}

TEST(TraceConstant, ConstantModeClosedForm)
{
    // p = 0, dt = h: sqrt(area(Q_K) h / |K|) = 2
    const auto mesh = build_slab(grid(2), 0.0, 0.5, DeformationMap{0.0}, 1.0);
    EXPECT_NEAR(estimate_trace_constant(mesh, 0, 0), 2.0, 1e-12);
}

TEST(TraceConstant, MonotoneInDegree)
{
    const auto mesh = build_slab(grid(3), 0.0, 0.2, DeformationMap{0.1}, 1.0);
    double prev = 0.0;
    for (int p = 0; p <= 3; ++p) {
        const double c = estimate_trace_constant(mesh, p, p);
        EXPECT_GE(c, prev - 1e-12);
        prev = c;
    }
}

TEST(TraceConstant, StableUnderRefinement)
{
    std::vector<double> c;
    for (int n : {5, 10, 20})
        c.push_back(estimate_trace_constant(build_slab(grid(n), 0.0, 1.0 / n, DeformationMap{0.0}, 1.0), 1, 1));
    EXPECT_LT(make_drift("c_star", c, 0.1).drift, 0.1);
}

TEST(Coercivity, TransportField)
{
    const auto c = manufactured(PolynomialField{{{0, 0, 0}}, {1.0}}, 1e-2, BetaChoice::zero);
    const auto mesh = layered_mesh(c.problem, 3, 2);
    for (int p : {1, 2}) {
        const auto r = check_weighted_coercivity(mesh, c.problem, p, p, 8.0, 10.0, 50, 7);
        EXPECT_EQ(r.ratios.size(), 50u);
        EXPECT_GE(r.worst_ratio, 0.25);
        EXPECT_TRUE(r.pass);
    }
}

TEST(Coercivity, Preconditions)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto mesh = layered_mesh(c.problem, 3, 2);
    EXPECT_THROW(check_weighted_coercivity(mesh, c.problem, 1, 1, 8.0, 0.5 * chi_threshold(1.0), 5, 1),
                 ConfigurationError);
    EXPECT_THROW(check_weighted_coercivity(mesh, c.problem, 1, 1, 0.5, 10.0, 5, 1), ConfigurationError);
    EXPECT_THROW(check_weighted_coercivity(mesh, c.problem, 1, 1, 8.0, 10.0, 0, 1), ConfigurationError);
}

TEST(Coercivity, ZeroFieldProjected)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto mesh = layered_mesh(c.problem, 3, 2);
    const auto layout = make_layout(mesh, 1, 1);
    const TensorBasis basis(1, 1);
    const Vector w = Vector::Zero(long(mesh.elements.size()) * basis.size() + layout.total);
    EXPECT_EQ(weighted_projection(mesh, layout, WeightFunction{1.0, 10.0}, w).norm(), 0.0);
}

TEST(Inverse, TimeModeLegendreRatio)
{
    const double dt = 0.25, h = 0.5;
    const auto mesh = build_slab(grid(2), 0.0, dt, DeformationMap{0.0}, 1.0);
    const auto c = inverse_constants(mesh, 1, 0);
    EXPECT_NEAR(c.time_derivative * (1 / dt + 1 / h), std::sqrt(3.0) * 2.0 / dt, 1e-10);
    EXPECT_EQ(inverse_constants(mesh, 0, 0).time_derivative, 0.0);
    EXPECT_EQ(inverse_constants(mesh, 0, 0).spatial_gradient, 0.0);
}

TEST(Inverse, DeformedFiniteAndBounded)
{
    const auto pulse = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto levels = window_levels(pulse.problem, 10, 0.1, 0.1);
    const auto d = check_inverse_inequalities(ptrs(levels), 1, 1);
    for (const auto& c : d.constants) {
        for (double v : c.values) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GT(v, 0.0);
        }
        EXPECT_LT(c.drift, 0.3) << c.name;
    }
}

TEST(Inverse, UndeformedDrift)
{
    const auto pulse = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto levels = window_levels(pulse.problem, 5, 0.2, 0.0);
    const auto d = check_inverse_inequalities(ptrs(levels), 1, 1);
    EXPECT_TRUE(d.pass);
}

TEST(Projection, UndeformedDrift)
{
    const auto pulse = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto levels = window_levels(pulse.problem, 5, 0.2, 0.0);
    const auto d = check_projection_bounds(ptrs(levels), 1, 1, WeightFunction{1.0, 10.0}, 8, 3);
    for (const auto& c : d.constants)
        EXPECT_LT(c.drift, 0.1) << c.name;
    EXPECT_TRUE(d.pass);
}

TEST(Projection, WeightedLeftSideScalesWithTimeStep)
{
    // weighted[0] is already divided by dt; halving dt leaves it within 20%.
    const auto pulse = rotating_pulse(1e-2, MeshFamily::uniform);
    const WeightFunction phi{1.0, 10.0};
    const auto a = projection_constants(build_slab(grid(8), 0.0, 0.1, DeformationMap{0.0}, 1.0), 1, 1, phi, 4, 1);
    const auto b = projection_constants(build_slab(grid(8), 0.0, 0.05, DeformationMap{0.0}, 1.0), 1, 1, phi, 4, 1);
    EXPECT_NEAR(b.weighted[0] / a.weighted[0], 1.0, 0.2);
}

TEST(Reproduction, Examples)
{
    struct Item {
        PolynomialField u;
        int p;
    };
    const std::vector<Item> items{
        {PolynomialField{{{0, 0, 0}}, {1.0}}, 1},
        {PolynomialField{{{0, 1, 0}}, {1.0}}, 1},
        {PolynomialField{{{1, 1, 1}}, {1.0}}, 1},
        {PolynomialField{{{1, 1, 1}}, {1.0}}, 2},
    };
    for (const auto& it : items) {
        const auto c = manufactured(it.u, 0.1, BetaChoice::rotating);
        const auto r = check_reproduction(c.problem, case_sequence(c.problem, MeshFamily::uniform, 3, 3),
                                          HdgParams{it.p, it.p, default_alpha(it.p), 1});
        EXPECT_TRUE(r.pass) << r.relative;
        EXPECT_LT(r.relative, 1e-9);
    }
}

TEST(InfSup, SmallMeshPositive)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::uniform);
    const auto mesh = layered_mesh(c.problem, 3, 2);
    const auto r = probe_inf_sup(mesh, c.problem, HdgParams{1, 1, 8.0, 1}, 5, 1);
    EXPECT_GT(r.inf_sup, 0.0);
    EXPECT_GT(r.dofs, 0);
    EXPECT_THROW(probe_inf_sup(layered_mesh(c.problem, 10, 2), c.problem, HdgParams{2, 2, 32.0, 1}, 1, 1),
                 ConfigurationError);
}

TEST(Drift, Definition)
{
    const auto d = make_drift("x", {1.0, 1.05, 1.08}, 0.1);
    EXPECT_NEAR(d.drift, 0.08, 1e-14);
    EXPECT_TRUE(d.pass);
    EXPECT_FALSE(make_drift("y", {1.0, 1.2}, 0.1).pass);
}
