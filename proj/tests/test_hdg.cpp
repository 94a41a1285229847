#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "sthdg/cases.hpp"
#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/hdg.hpp"
#include "sthdg/norms.hpp"
#include "sthdg/quadrature.hpp"
#include "sthdg/stability.hpp"

using namespace sthdg;

namespace {

UniformGrid grid(int n)
{
    UniformGrid g;
    g.nx = g.ny = n;
    return g;
}

PolynomialField constant_field(double c) { return PolynomialField{{{0, 0, 0}}, {c}}; }

// Derivative of P_n from the sum of lower Legendre polynomials.
double legendre_derivative(int n, double x)
{
    double d = 0.0;
    for (int k = n - 1; k >= 0; k -= 2)
        d += (2 * k + 1) * std::legendre(k, x);
    return d;
}

Vector local_constant_trace(const SpaceTimeMesh& mesh, const TraceLayout& layout, int element)
{
    const auto tm = element_trace_map(mesh, layout, element);
    Vector l = Vector::Zero(tm.size());
    for (int k : tm.local)
        l[k] = 1.0;
    return l;
}

} // namespace

TEST(LocalForms, PureTransportBlockAgainstDenseQuadrature)
{
    const int p = 2;
    const double t0 = 0.0, dt = 0.5, h = 1.0;
    auto c = manufactured(constant_field(1.0), 0.0, BetaChoice::zero);
    const auto mesh = build_slab(grid(1), t0, t0 + dt, DeformationMap{0.0}, 1.0);
    const auto layout = make_layout(mesh, p, p);
    const HdgParams params{p, p, 8.0, 1};
    const auto bs = facet_beta_s(mesh, c.problem, p, p);
    const auto blocks = local_forms(mesh, 0, layout, c.problem, params, bs);

    const TensorBasis basis(p, p);
    const int n = basis.size();
    const auto r = gauss_rule(p + 2);
    Matrix oracle = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto di = basis.degrees(i), dj = basis.degrees(j);
            auto line = [&](int a, int b, bool deriv) {
                double s = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q) {
                    const double x = r.points[q];
                    s += r.weights[q] * std::legendre(b, x) * (deriv ? legendre_derivative(a, x) : std::legendre(a, x));
                }
                return s;
            };
            const double sx = line(di[1], dj[1], false), sy = line(di[2], dj[2], false);
            // -(u, d_t v) with d_t = (2/dt) d_that and dX = (dt/2)(h/2)^2
            const double vol = -line(di[0], dj[0], true) * (2.0 / dt) * (dt / 2.0) * (h * h / 4.0) * sx * sy;
            // beta_s u v on both time faces
            const double faces = (std::legendre(di[0], -1.0) * std::legendre(dj[0], -1.0) +
                                  std::legendre(di[0], 1.0) * std::legendre(dj[0], 1.0)) *
                                 (h * h / 4.0) * sx * sy;
            oracle(i, j) = vol + faces;
        }
    const double scale = oracle.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            EXPECT_NEAR(blocks.Auu(i, j), oracle(i, j), 1e-12 * scale) << i << " " << j;
}

TEST(LocalForms, DiffusivePartSymmetric)
{
    const int p = 2;
    const auto c0 = manufactured(constant_field(1.0), 0.0, BetaChoice::zero);
    const auto c1 = manufactured(constant_field(1.0), 0.3, BetaChoice::zero);
    const auto mesh = build_slab(grid(3), 0.0, 0.2, DeformationMap{0.1}, 1.0);
    const auto layout = make_layout(mesh, p, p);
    const HdgParams params{p, p, 32.0, 1};
    const auto bs = facet_beta_s(mesh, c0.problem, p, p);
    for (int e : {0, 4}) {
        const auto a = local_forms(mesh, e, layout, c1.problem, params, bs);
        const auto b = local_forms(mesh, e, layout, c0.problem, params, bs);
        const int n = a.Auu.rows(), m = a.All.rows();
        Matrix full(n + m, n + m), zero(n + m, n + m);
        full << a.Auu, a.Aul, a.Alu, a.All;
        zero << b.Auu, b.Aul, b.Alu, b.All;
        const Matrix d = full - zero;
        EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-13 * d.cwiseAbs().maxCoeff());
    }
}

TEST(LocalForms, ConstantStatePatch)
{
    const auto c = manufactured(constant_field(1.0), 0.1, BetaChoice::rotating);
    const auto mesh = build_slab(grid(1), 0.0, 1.0, DeformationMap{0.0}, 1.0);
    for (int p : {1, 2}) {
        const auto layout = make_layout(mesh, p, p);
        const HdgParams params{p, p, default_alpha(p), 1};
        const auto blocks = local_forms(mesh, 0, layout, c.problem, params, facet_beta_s(mesh, c.problem, p, p));
        Vector u = Vector::Zero(blocks.Auu.rows());
        u[0] = 1.0;
        const Vector l = local_constant_trace(mesh, layout, 0);
        const Vector ru = blocks.Auu * u + blocks.Aul * l - blocks.bu;
        const Vector rl = blocks.Alu * u + blocks.All * l - blocks.bl;
        EXPECT_LT(ru.cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(rl.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(LocalForms, MissingNeumannData)
{
    ProblemSpec bare;
    bare.name = "bare";
    bare.epsilon = 0.1;
    const auto mesh = build_slab(grid(1), 0.0, 1.0, DeformationMap{0.0}, 1.0);
    const auto layout = make_layout(mesh, 1, 1);
    const HdgParams params{1, 1, 8.0, 1};
    EXPECT_THROW(local_forms(mesh, 0, layout, bare, params, facet_beta_s(mesh, bare, 1, 1)), ConfigurationError);
}

TEST(LocalForms, BadParameters)
{
    const auto c = manufactured(constant_field(1.0), 0.1, BetaChoice::zero);
    const auto mesh = build_slab(grid(1), 0.0, 1.0, DeformationMap{0.0}, 1.0);
    const auto layout = make_layout(mesh, 1, 1);
    const auto bs = facet_beta_s(mesh, c.problem, 1, 1);
    EXPECT_THROW(local_forms(mesh, 0, layout, c.problem, HdgParams{1, 1, 0.0, 1}, bs), ConfigurationError);
    EXPECT_THROW(local_forms(mesh, 0, layout, c.problem, HdgParams{-1, 1, 8.0, 1}, bs), ConfigurationError);
}

TEST(Condense, BlockDiagonal)
{
    LocalBlocks b;
    b.Auu = Matrix::Identity(3, 3) * 2.0;
    b.Aul = Matrix::Zero(3, 2);
    b.Alu = Matrix::Zero(2, 3);
    b.All = (Matrix(2, 2) << 1, 2, 3, 4).finished();
    b.bu = Vector::Ones(3);
    b.bl = Vector::Constant(2, 5.0);
    const auto c = condense(b);
    EXPECT_LT((c.S - b.All).norm(), 1e-15);
    EXPECT_LT((c.rhs - b.bl).norm(), 1e-15);
}

TEST(Condense, ScalarHandCase)
{
    LocalBlocks b;
    b.Auu = Matrix::Constant(1, 1, 2.0);
    b.Aul = Matrix::Constant(1, 1, 1.0);
    b.Alu = Matrix::Constant(1, 1, 1.0);
    b.All = Matrix::Constant(1, 1, 1.0);
    b.bu = Vector::Zero(1);
    b.bl = Vector::Zero(1);
    EXPECT_NEAR(condense(b).S(0, 0), 0.5, 1e-15);
}

TEST(Condense, RandomAgainstDenseElimination)
{
    std::mt19937 rng(4);
    std::normal_distribution<double> nd;
    const int n = 12, m = 7;
    auto rnd = [&](int r, int c) {
        Matrix a(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                a(i, j) = nd(rng);
        return a;
    };
    LocalBlocks b;
    b.Auu = rnd(n, n) + 10.0 * Matrix::Identity(n, n);
    b.Aul = rnd(n, m);
    b.Alu = rnd(m, n);
    b.All = rnd(m, m);
    b.bu = rnd(n, 1);
    b.bl = rnd(m, 1);
    const auto c = condense(b);
    // Eliminate u from the full system by solving it densely for many right-hand sides.
    Matrix full(n + m, n + m);
    full << b.Auu, b.Aul, b.Alu, b.All;
    Vector rhs(n + m);
    rhs << b.bu, b.bl;
    const Vector x = full.fullPivLu().solve(rhs);
    const Vector lam = x.tail(m);
    EXPECT_LT((c.S * lam - c.rhs).norm(), 1e-12 * c.rhs.norm());
    const Matrix inv = b.Auu.inverse();
    EXPECT_LT((c.S - (b.All - b.Alu * inv * b.Aul)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Condense, SingularElementIdentified)
{
    LocalBlocks b;
    b.Auu = Matrix::Zero(2, 2);
    b.Aul = Matrix::Zero(2, 1);
    b.Alu = Matrix::Zero(1, 2);
    b.All = Matrix::Identity(1, 1);
    b.bu = Vector::Zero(2);
    b.bl = Vector::Zero(1);
    try {
        condense(b, 17);
        FAIL();
    } catch (const SolverError& e) {
        EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
    }
}

TEST(AssembleSlab, TransportOfConstants)
{
    // eps = 0, beta = (1,0,0), f = 0, inflow 1 on a slab that starts after t = 0.
    auto c = manufactured(constant_field(1.0), 0.0, BetaChoice::zero);
    auto mesh = std::make_shared<const SpaceTimeMesh>(build_slab(grid(1), 0.5, 1.0, DeformationMap{0.0}, 1.0));
    const InflowFunction inflow = [](double, double) { return 1.0; };
    for (int p : {0, 1, 2}) {
        SlabStats st;
        const auto s = solve_slab(mesh, c.problem, HdgParams{p, p, 8.0, 1}, {}, &inflow, &st);
        ASSERT_EQ(s.u.size(), 1u);
        Vector e0 = Vector::Zero(s.u[0].size());
        e0[0] = 1.0;
        EXPECT_LT((s.u[0] - e0).cwiseAbs().maxCoeff(), 1e-12);
        for (std::size_t f = 0; f < mesh->facets.size(); ++f) {
            const auto& fc = mesh->facets[f];
            if (fc.kind != FacetKind::R)
                continue;
            for (double a : {-0.7, 0.2})
                EXPECT_NEAR(eval_trace(s, int(f), Vec2(a, -a)), 1.0, 1e-12);
        }
        EXPECT_LT(st.residual, 1e-10);
    }
}

TEST(AssembleSlab, ZeroDataZeroSolution)
{
    const auto c = zero_case(1e-2);
    auto mesh = std::make_shared<const SpaceTimeMesh>(case_slab(c.problem, MeshFamily::ring, 5, 5, 0));
    SlabStats st;
    const auto s = solve_slab(mesh, c.problem, HdgParams{1, 1, 8.0, 1}, {}, nullptr, &st);
    for (const auto& u : s.u)
        EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.lambda.cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleSlab, ManufacturedUncondensedResidual)
{
    for (int p : {1, 2, 3}) {
        const auto c = manufactured(p, p, 0.1, BetaChoice::rotating);
        auto mesh = std::make_shared<const SpaceTimeMesh>(build_slab(grid(3), 0.0, 0.25, DeformationMap{0.0}, 1.0));
        SlabStats st;
        solve_slab(mesh, c.problem, HdgParams{p, p, default_alpha(p), 1}, {}, nullptr, &st);
        EXPECT_LT(st.residual, 1e-10) << p;
    }
}

TEST(AssembleSlab, GlobalOperatorConsistentWithCondensation)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::ring);
    auto mesh = std::make_shared<const SpaceTimeMesh>(case_slab(c.problem, MeshFamily::ring, 10, 10, 0));
    const HdgParams params{1, 1, 8.0, 1};
    const auto s = solve_slab(mesh, c.problem, params, {}, nullptr);
    const auto g = assemble_global(*mesh, c.problem, params);
    Vector x(g.num_u + g.num_lambda);
    int k = 0;
    for (const auto& u : s.u) {
        x.segment(k, u.size()) = u;
        k += u.size();
    }
    x.tail(g.num_lambda) = s.lambda;
    EXPECT_LT(relative_residual(g.A, x, g.b), 1e-10);
}

TEST(AssembleSlab, ThreadCountDoesNotChangeResult)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::ring);
    const auto mesh = case_slab(c.problem, MeshFamily::ring, 10, 10, 0);
    const auto a = assemble_slab(mesh, c.problem, HdgParams{1, 1, 8.0, 1});
    const auto b = assemble_slab(mesh, c.problem, HdgParams{1, 1, 8.0, 3});
    EXPECT_EQ(a.S.val, b.S.val);
    EXPECT_EQ(a.S.col, b.S.col);
    EXPECT_EQ(a.rhs, b.rhs);
}

TEST(AssembleSlab, DanglingHangingFacet)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::ring);
    auto mesh = refine_elements(build_slab(grid(2), 0.0, 0.1, DeformationMap{0.0}, 1.0), {0});
    for (auto& f : mesh.facets)
        if (f.coarse_slot >= 0) {
            f.child = -1;
            break;
        }
    EXPECT_THROW(assemble_slab(mesh, c.problem, HdgParams{1, 1, 8.0, 1}), TopologyError);
}

TEST(AssembleSlab, PureAdvectionSolvable)
{
    // eps = 0 with the rotating field: no division by eps, upwind DG in space-time.
    auto c = rotating_pulse(1e-2, MeshFamily::uniform);
    c.problem.epsilon = 0.0;
    auto mesh = std::make_shared<const SpaceTimeMesh>(case_slab(c.problem, MeshFamily::uniform, 6, 6, 0));
    SlabStats st;
    const auto s = solve_slab(mesh, c.problem, HdgParams{1, 1, 8.0, 1}, {}, nullptr, &st);
    EXPECT_LT(st.residual, 1e-10);
    for (const auto& u : s.u)
        EXPECT_TRUE(u.allFinite());
}

TEST(March, TwoSlabsEqualOneTwoLayerSlab)
{
    const auto c = manufactured(tensor_polynomial(2, 2), 1e-2, BetaChoice::rotating);
    const int p = 1;
    const HdgParams params{p, p, 8.0, 1};
    const std::vector<double> times{0.0, 0.125, 0.25};
    MeshSequence seq;
    seq.count = 2;
    seq.build = [&](int n, const InterfaceLayout* lower) {
        MeshOptions o;
        o.lower = lower;
        return build_slab(grid(4), times[n], times[n + 1], DeformationMap{0.1}, 1.0, o);
    };
    const auto split = march(c.problem, seq, params);
    auto whole = std::make_shared<const SpaceTimeMesh>(build_mesh(grid(4), times, DeformationMap{0.1}, 1.0));
    const auto one = solve_slab(whole, c.problem, params, {}, nullptr);
    int matched = 0;
    double worst = 0.0;
    for (std::size_t e = 0; e < whole->elements.size(); ++e) {
        for (const auto& s : split.solution.slabs)
            for (std::size_t k = 0; k < s.mesh->elements.size(); ++k)
                if ((s.mesh->elements[k].corners[0] - whole->elements[e].corners[0]).norm() < 1e-12 &&
                    (s.mesh->elements[k].corners[7] - whole->elements[e].corners[7]).norm() < 1e-12) {
                    worst = std::max(worst, (s.u[k] - one.u[e]).cwiseAbs().maxCoeff());
                    ++matched;
                }
    }
    EXPECT_EQ(matched, 32);
    EXPECT_LT(worst, 1e-10);
}

TEST(March, InterfaceMismatch)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::uniform);
    MeshSequence seq;
    seq.count = 2;
    seq.build = [&](int n, const InterfaceLayout* lower) {
        MeshOptions o;
        o.lower = lower;
        // the second slab leaves a gap in time
        return build_slab(grid(2), n == 0 ? 0.0 : 0.2, n == 0 ? 0.1 : 0.3, DeformationMap{0.1}, 1.0, o);
    };
    EXPECT_THROW(march(c.problem, seq, HdgParams{1, 1, 8.0, 1}), TopologyError);
}

TEST(March, Causality)
{
    const auto c = rotating_pulse(1e-2, MeshFamily::ring);
    const auto seq = case_sequence(c.problem, MeshFamily::ring, 10, 10);
    const auto r = check_causality(c.problem, seq, HdgParams{1, 1, 8.0, 1}, 2);
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.max_relative_change, 1e-12);
    EXPECT_GT(r.perturbed_change, 1e-8);
}

TEST(March, ResidualEverySlab)
{
    const auto c = rotating_pulse(1e-8, MeshFamily::ring);
    const auto seq = case_sequence(c.problem, MeshFamily::ring, 10, 10);
    const auto r = march(c.problem, seq, HdgParams{1, 1, 8.0, 1});
    ASSERT_EQ(r.stats.size(), 10u);
    for (const auto& s : r.stats)
        EXPECT_LT(s.residual, 1e-10);
}
