#pragma once

#include <vector>

#include "sthdg/mesh.hpp"
#include "sthdg/quadrature.hpp"
#include "sthdg/types.hpp"

namespace sthdg {

/// Jacobian data of the trilinear element map at a reference point.
///
/// jac(i, j) = dX_i / dxi_j with X = (t, x1, x2).
struct MappedGeometry {
    Mat3 jac;
    Mat3 inv;
    double det = 0.0;
};

Vec3 map_point(const Element& element, const Vec3& xi);

/// Throws GeometryError when det J <= 0.
MappedGeometry geometry(const Element& element, const Vec3& xi, long element_id = -1);

struct FaceMeasure {
    double factor = 0.0; // sqrt(det(J^j^T J^j))
    Vec3 normal;         // outward unit space-time normal
};

/// Face f = 2*axis + side, evaluated at a reference point on that face.
FaceMeasure face_measure(const Element& element, int face, const Vec3& xi, long element_id = -1);

/// Reference point on face f from facet-square coordinates over the whole face.
Vec3 face_point(int face, const Vec2& s);

/// Physical gradient J^{-T} g_ref.
inline Vec3 physical_gradient(const MappedGeometry& g, const Vec3& ref_grad)
{
    return g.inv.transpose() * ref_grad;
}

/// Element reference coordinates of a lattice point.
Vec3 element_coords(const LatticeBox& element_box, const Vec3& lattice_point);

/// Lattice point of facet-square coordinates s on a face-aligned region.
Vec3 region_lattice_point(const LatticeBox& region, int axis, const Vec2& s);

/// Facet-square coordinates of a lattice point on a face-aligned region.
Vec2 region_coords(const LatticeBox& region, int axis, const Vec3& lattice_point);

struct FacetPoint {
    Vec2 s;        // facet-square coordinates on the region
    Vec3 lattice;  // lattice coordinates
    Vec3 xi;       // element reference coordinates
    Vec3 x;        // physical (t, x1, x2)
    double weight; // quadrature weight times surface measure
    Vec3 normal;   // outward normal of the element
};

/// Quadrature on a face-aligned region of face f of an element.
void face_region_points(const SpaceTimeMesh& mesh, int element, int face, const LatticeBox& region,
                        const QuadratureRule2D& rule, std::vector<FacetPoint>& out);

/// Quadrature on a facet seen from owner slot k.
void facet_points(const SpaceTimeMesh& mesh, const Facet& facet, int slot, const QuadratureRule2D& rule,
                  std::vector<FacetPoint>& out);

} // namespace sthdg
