#include "sthdg/geometry.hpp"

#include "sthdg/errors.hpp"

namespace sthdg {

namespace {

void shape(const Vec3& xi, double n[8], double dn[8][3])
{
    const double m[3] = {0.5 * (1.0 - xi[0]), 0.5 * (1.0 - xi[1]), 0.5 * (1.0 - xi[2])};
    const double p[3] = {0.5 * (1.0 + xi[0]), 0.5 * (1.0 + xi[1]), 0.5 * (1.0 + xi[2])};
    for (int c = 0; c < 8; ++c) {
        const int b[3] = {(c >> 2) & 1, (c >> 1) & 1, c & 1};
        double f[3], d[3];
        for (int a = 0; a < 3; ++a) {
            f[a] = b[a] ? p[a] : m[a];
            d[a] = b[a] ? 0.5 : -0.5;
        }
        n[c] = f[0] * f[1] * f[2];
        dn[c][0] = d[0] * f[1] * f[2];
        dn[c][1] = f[0] * d[1] * f[2];
        dn[c][2] = f[0] * f[1] * d[2];
    }
}

Mat3 jacobian(const Element& e, const Vec3& xi)
{
    double n[8], dn[8][3];
    shape(xi, n, dn);
    Mat3 j = Mat3::Zero();
    for (int c = 0; c < 8; ++c)
        for (int a = 0; a < 3; ++a)
            j.col(a) += dn[c][a] * e.corners[c];
    return j;
}

} // namespace

Vec3 map_point(const Element& element, const Vec3& xi)
{
    double n[8], dn[8][3];
    shape(xi, n, dn);
    Vec3 x = Vec3::Zero();
    for (int c = 0; c < 8; ++c)
        x += n[c] * element.corners[c];
    return x;
}

MappedGeometry geometry(const Element& element, const Vec3& xi, long element_id)
{
    MappedGeometry g;
    g.jac = jacobian(element, xi);
    g.det = g.jac.determinant();
    if (!(g.det > 0.0))
        throw GeometryError("non-positive Jacobian determinant in element " + std::to_string(element_id),
                            element_id);
    g.inv = g.jac.inverse();
    return g;
}

FaceMeasure face_measure(const Element& element, int face, const Vec3& xi, long element_id)
{
    if (face < 0 || face > 5)
        throw ContractError("face_measure: face index out of range");
    const Mat3 j = jacobian(element, xi);
    const int axis = face / 2;
    const int b1 = (axis + 1) % 3, b2 = (axis + 2) % 3;
    // Cyclic order makes cross(J_b1, J_b2) point along +xi_axis for det J > 0.
    const Vec3 c = j.col(b1).cross(j.col(b2));
    FaceMeasure m;
    m.factor = c.norm();
    if (!(m.factor > 0.0))
        throw GeometryError("degenerate face " + std::to_string(face) + " in element " +
                                std::to_string(element_id),
                            element_id);
    m.normal = (face % 2 == 1 ? 1.0 : -1.0) * c / m.factor;
    return m;
}

Vec3 face_point(int face, const Vec2& s)
{
    const int axis = face / 2;
    Vec3 xi;
    xi[axis] = face % 2 == 1 ? 1.0 : -1.0;
    const int f0 = axis == 0 ? 1 : 0;
    const int f1 = axis == 2 ? 1 : 2;
    xi[f0] = s[0];
    xi[f1] = s[1];
    return xi;
}

namespace {

std::array<int, 2> free_of(int axis)
{
    switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
    }
}

} // namespace

Vec3 element_coords(const LatticeBox& b, const Vec3& p)
{
    Vec3 xi;
    for (int a = 0; a < 3; ++a)
        xi[a] = 2.0 * (p[a] - double(b.lo[a])) / double(b.size) - 1.0;
    return xi;
}

Vec3 region_lattice_point(const LatticeBox& region, int axis, const Vec2& s)
{
    const auto fr = free_of(axis);
    Vec3 p;
    p[axis] = double(region.lo[axis]);
    p[fr[0]] = double(region.lo[fr[0]]) + 0.5 * (s[0] + 1.0) * double(region.size);
    p[fr[1]] = double(region.lo[fr[1]]) + 0.5 * (s[1] + 1.0) * double(region.size);
    return p;
}

Vec2 region_coords(const LatticeBox& region, int axis, const Vec3& p)
{
    const auto fr = free_of(axis);
    return {2.0 * (p[fr[0]] - double(region.lo[fr[0]])) / double(region.size) - 1.0,
            2.0 * (p[fr[1]] - double(region.lo[fr[1]])) / double(region.size) - 1.0};
}

void face_region_points(const SpaceTimeMesh& mesh, int element, int face, const LatticeBox& region,
                        const QuadratureRule2D& rule, std::vector<FacetPoint>& out)
{
    const auto& e = mesh.elements[element];
    const int axis = face / 2;
    const double r = double(region.size) / double(e.box.size);
    out.resize(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
        FacetPoint& fp = out[q];
        fp.s = rule.points[q];
        fp.lattice = region_lattice_point(region, axis, fp.s);
        fp.xi = element_coords(e.box, fp.lattice);
        fp.xi[axis] = face % 2 == 1 ? 1.0 : -1.0;
        fp.x = map_point(e, fp.xi);
        const auto m = face_measure(e, face, fp.xi, element);
        fp.weight = rule.weights[q] * m.factor * r * r;
        fp.normal = m.normal;
    }
}

void facet_points(const SpaceTimeMesh& mesh, const Facet& facet, int slot, const QuadratureRule2D& rule,
                  std::vector<FacetPoint>& out)
{
    face_region_points(mesh, facet.owner[slot], facet.face[slot], facet.box, rule, out);
}

} // namespace sthdg
