#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "sthdg/cases.hpp"
#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/quadrature.hpp"

using namespace sthdg;

namespace {

UniformGrid grid(int n)
{
    UniformGrid g;
    g.nx = g.ny = n;
    return g;
}

struct Counts {
    int r = 0, q_interior = 0, q_boundary = 0, hanging = 0;
};

Counts count(const SpaceTimeMesh& m)
{
    Counts c;
    for (const auto& f : m.facets) {
        if (f.kind == FacetKind::R)
            ++c.r;
        else if (f.boundary())
            ++c.q_boundary;
        else
            ++c.q_interior;
        c.hanging += f.coarse_slot >= 0;
    }
    return c;
}

double element_volume(const Element& e)
{
    const auto r = tensor_rule_3d(4, 4);
    double v = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q)
        v += r.weights[q] * geometry(e, r.points[q]).det;
    return v;
}

// Physical area enclosed by the deformed boundary polygon of an n x n grid at time t,
// nodes moving linearly in time between the two slab levels.
double polygon_area(int n, double amplitude, double t0, double t1, double t)
{
    std::vector<Vec2> ring;
    auto add = [&](double u, double v) {
        const Vec2 a = deform_point(Vec2(u, v), t0, amplitude);
        const Vec2 b = deform_point(Vec2(u, v), t1, amplitude);
        const double s = (t - t0) / (t1 - t0);
        ring.push_back((1 - s) * a + s * b);
    };
    const double h = 1.0 / n;
    for (int i = 0; i < n; ++i) add(-0.5 + i * h, -0.5);
    for (int i = 0; i < n; ++i) add(0.5, -0.5 + i * h);
    for (int i = 0; i < n; ++i) add(0.5 - i * h, 0.5);
    for (int i = 0; i < n; ++i) add(-0.5, 0.5 - i * h);
    double a = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Vec2& p = ring[i];
        const Vec2& q = ring[(i + 1) % ring.size()];
        a += p[0] * q[1] - p[1] * q[0];
    }
    return 0.5 * a;
}

} // namespace

TEST(Deformation, Examples)
{
    const Vec2 x(0.13, -0.27);
    EXPECT_EQ(deform_point(x, 0.4, 0.0), x);
    for (double t : {0.0, 0.3, 0.77})
        EXPECT_LT((deform_point(Vec2(0.5, 0.5), t, 0.1) - Vec2(0.5, 0.5)).norm(), 1e-15);
    EXPECT_LT((deform_point(Vec2(0.0, 0.0), 0.25, 0.1) - Vec2(-0.05, -0.05)).norm(), 1e-15);
}

TEST(BuildSlab, AffinePrisms)
{
    const auto m = build_slab(grid(2), 0.0, 0.1, DeformationMap{0.0}, 1.0);
    ASSERT_EQ(m.elements.size(), 4u);
    for (const auto& e : m.elements) {
        EXPECT_NEAR(e.h, 0.5, 1e-15);
        EXPECT_NEAR(e.dt, 0.1, 1e-15);
        for (const Vec3 xi : {Vec3(0, 0, 0), Vec3(0.9, -0.9, 0.3)})
            EXPECT_NEAR(geometry(e, xi).det, 0.05 * 0.25 * 0.25, 1e-16);
    }
    const auto d = validate(m);
    EXPECT_TRUE(d.ok());
    EXPECT_NEAR(d.min_det_j, d.max_det_j, 1e-16);
}

TEST(BuildSlab, DeformedPositiveJacobian)
{
    const auto m = build_slab(grid(10), 0.0, 0.1, DeformationMap{0.1}, 1.0);
    ASSERT_EQ(m.elements.size(), 100u);
    const auto r = gauss_rule(4);
    for (const auto& e : m.elements)
        for (double a : r.points)
            for (double b : r.points)
                for (double c : r.points)
                    EXPECT_GT(geometry(e, Vec3(a, b, c)).det, 0.0);
    const auto d = validate(m);
    EXPECT_GT(d.min_det_j, 0.0);
    EXPECT_LT(d.max_det_j / d.min_det_j, 10.0);
}

TEST(BuildSlab, EmptyInterval)
{
    EXPECT_THROW(build_slab(grid(2), 0.1, 0.1, DeformationMap{0.0}, 1.0), DomainError);
}

TEST(BuildSlab, VolumeMatchesGlobalQuadrature)
{
    for (double amp : {0.0, 0.1}) {
        const double t0 = 0.3, t1 = 0.4;
        const auto m = build_slab(grid(6), t0, t1, DeformationMap{amp}, 1.0);
        double sum = 0.0;
        for (const auto& e : m.elements)
            sum += element_volume(e);
        const auto r = gauss_rule(5);
        double ref = 0.0;
        for (std::size_t q = 0; q < r.size(); ++q)
            ref += r.weights[q] * 0.5 * (t1 - t0) *
                   polygon_area(6, amp, t0, t1, 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * r.points[q]);
        EXPECT_LT(std::abs(sum - ref) / ref, 1e-10) << amp;
    }
}

TEST(FacetTopology, SingleElement)
{
    const auto m = build_slab(grid(1), 0.0, 0.1, DeformationMap{0.0}, 1.0);
    const auto c = count(m);
    EXPECT_EQ(c.r, 2);
    EXPECT_EQ(c.q_boundary, 4);
    EXPECT_EQ(c.q_interior, 0);
    for (const auto& f : m.facets)
        EXPECT_TRUE(f.boundary());
}

TEST(FacetTopology, UniformCounts)
{
    for (int n : {2, 3, 5, 10}) {
        const auto m = build_slab(grid(n), 0.0, 0.1, DeformationMap{0.1}, 1.0);
        const auto c = count(m);
        EXPECT_EQ(c.r, 2 * n * n);
        EXPECT_EQ(c.q_interior, 2 * n * (n - 1));
        EXPECT_EQ(c.q_boundary, 4 * n);
        EXPECT_EQ(c.hanging, 0);
    }
}

TEST(FacetTopology, RNormalsVanishInSpace)
{
    const auto m = build_slab(grid(3), 0.0, 0.1, DeformationMap{0.1}, 1.0);
    const auto rule = tensor_rule_2d(3, 3);
    std::vector<FacetPoint> pts;
    for (const auto& f : m.facets) {
        facet_points(m, f, 0, rule, pts);
        for (const auto& p : pts) {
            if (f.kind == FacetKind::R)
                EXPECT_LT(p.normal.tail<2>().norm(), 1e-14);
            else
                EXPECT_GT(p.normal.tail<2>().norm(), 0.5);
        }
    }
}

TEST(Refine, EmptyMarkIsNoOp)
{
    const auto m = build_slab(grid(3), 0.0, 0.1, DeformationMap{0.1}, 1.0);
    const auto r = refine_elements(m, {});
    ASSERT_EQ(r.elements.size(), m.elements.size());
    EXPECT_EQ(r.facets.size(), m.facets.size());
    for (std::size_t i = 0; i < m.elements.size(); ++i)
        EXPECT_LT((r.elements[i].corners[7] - m.elements[i].corners[7]).norm(), 1e-15);
}

TEST(Refine, OneElementOfFour)
{
    const auto m = build_slab(grid(2), 0.0, 0.1, DeformationMap{0.0}, 1.0);
    const auto r = refine_elements(m, {0});
    ASSERT_EQ(r.elements.size(), 11u);
    int children = 0;
    for (const auto& e : r.elements)
        children += e.level == 1;
    EXPECT_EQ(children, 8);

    // Two coarse-fine interfaces with 4 sub-facets each.
    std::map<std::pair<int, int>, int> per_coarse_face;
    int interior_r = 0;
    for (const auto& f : r.facets) {
        if (f.coarse_slot >= 0) {
            const int coarse = f.owner[f.coarse_slot];
            ++per_coarse_face[{coarse, f.face[f.coarse_slot]}];
            EXPECT_GE(f.child, 0);
            EXPECT_LE(f.child, 3);
            EXPECT_EQ(r.elements[f.owner[1 - f.coarse_slot]].level, 1);
        }
        if (f.kind == FacetKind::R && !f.boundary())
            ++interior_r;
    }
    EXPECT_EQ(per_coarse_face.size(), 2u);
    for (const auto& [k, v] : per_coarse_face)
        EXPECT_EQ(v, 4);
    EXPECT_EQ(interior_r, 4); // between the two child layers
    EXPECT_TRUE(validate(r).ok());
}

TEST(Refine, BoundaryTiledByFacets)
{
    // Every element face is covered exactly by the area of its facets.
    const auto m = build_slab(grid(4), 0.0, 0.1, DeformationMap{0.0}, 1.0);
    const auto r = refine_elements(m, {5, 6});
    for (std::size_t i = 0; i < r.elements.size(); ++i) {
        const auto& e = r.elements[i];
        for (int f = 0; f < 6; ++f) {
            long covered = 0;
            for (int id : e.face_facets[f]) {
                const auto& fc = r.facets[id];
                EXPECT_TRUE(fc.owner[0] == int(i) || fc.owner[1] == int(i));
                covered += fc.box.size * fc.box.size;
            }
            EXPECT_EQ(covered, e.box.size * e.box.size) << i << " " << f;
        }
    }
    for (const auto& f : r.facets)
        if (!f.boundary())
            EXPECT_NE(f.owner[0], f.owner[1]);
    const auto d = validate(r);
    EXPECT_LE(d.max_level_jump, 1);
}

TEST(Refine, RingMatchesBruteForce)
{
    const auto pulse = rotating_pulse(1e-2);
    const auto m = build_slab(grid(10), 0.0, 0.1, pulse.problem.deformation, 1.0);
    const auto marks = ring_marks(m);
    std::set<int> brute;
    for (int i = 0; i < 100; ++i) {
        const auto& e = m.elements[i];
        const double cx = -0.5 + 0.1 * (double(e.box.lo[1]) / kRootSize + 0.5);
        const double cy = -0.5 + 0.1 * (double(e.box.lo[2]) / kRootSize + 0.5);
        const Vec2 c(cx, cy);
        if (std::abs(std::hypot(c[0], c[1]) - 0.2) < 0.1)
            brute.insert(i);
    }
    EXPECT_EQ(std::set<int>(marks.begin(), marks.end()), brute);
    EXPECT_GT(brute.size(), 0u);
    EXPECT_LT(brute.size(), 100u);
    const auto r = refine_elements(m, marks);
    long fine = 0;
    for (const auto& e : r.elements)
        fine += e.level == 1;
    EXPECT_GE(fine, 8 * long(brute.size()));
    EXPECT_EQ(r.elements.size() - fine + fine / 8, 100u);
    const auto d = validate(r);
    EXPECT_LE(d.max_level_jump, 1);
    for (const auto& v : d.violations)
        EXPECT_NE(v.kind, "level_jump");
}

TEST(Validate, InvertedElementFlagged)
{
    auto m = build_slab(grid(2), 0.0, 0.1, DeformationMap{0.0}, 1.0);
    std::swap(m.elements[1].corners[0], m.elements[1].corners[3]);
    EXPECT_THROW(geometry(m.elements[1], Vec3(-0.9, -0.9, -0.9), 1), GeometryError);
    const auto d = validate(m);
    EXPECT_FALSE(d.ok());
    bool found = false;
    for (const auto& v : d.violations)
        found |= v.kind == "det_j" && v.element == 1;
    EXPECT_TRUE(found);
}

TEST(Validate, TimeStepAboveMeshSize)
{
    const auto m = build_slab(grid(10), 0.0, 0.2, DeformationMap{0.0}, 1.0);
    const auto d = validate(m);
    ASSERT_FALSE(d.ok());
    EXPECT_EQ(d.violations.front().kind, "dt_le_h");
}

TEST(Vtk, WritesHexahedra)
{
    const auto m = build_slab(grid(2), 0.0, 0.1, DeformationMap{0.1}, 1.0);
    const auto path = std::filesystem::temp_directory_path() / "sthdg_mesh_test.vtk";
    std::vector<double> vals(8 * m.elements.size(), 1.5);
    write_vtk(path.string(), m, vals);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_NE(first.find("vtk DataFile"), std::string::npos);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NE(ss.str().find("CELLS 4"), std::string::npos);
    EXPECT_NE(ss.str().find("u_h"), std::string::npos);
    std::filesystem::remove(path);
    EXPECT_THROW(write_vtk(path.string(), m, {1.0}), ContractError);
}
