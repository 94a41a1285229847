#pragma once

#include <array>
#include <string>
#include <vector>

#include "sthdg/types.hpp"

namespace sthdg {

/// Finest refinement level; root cells span 2^kMaxLevel lattice units per axis.
inline constexpr int kMaxLevel = 8;
inline constexpr long kRootSize = 1L << kMaxLevel;

Vec2 deform_point(const Vec2& x_uniform, double t, double amplitude);

struct DeformationMap {
    double amplitude = 0.0;

    Vec2 operator()(const Vec2& x_uniform, double t) const
    {
        return deform_point(x_uniform, t, amplitude);
    }
};

/// Tensor grid of root cells in uniform coordinates.
struct UniformGrid {
    int nx = 1, ny = 1;
    Vec2 lo{-0.5, -0.5};
    Vec2 hi{0.5, 0.5};
};

/// Spatial boundary sides of the uniform box.
enum class Side : int { left = 0, right = 1, bottom = 2, top = 3 };

struct BoundaryPartition {
    std::array<bool, 4> dirichlet{false, false, false, false};

    bool is_dirichlet(int side) const { return side >= 0 && dirichlet[side]; }
};

enum class FacetKind { Q, R };

enum class BoundaryTag {
    interior,
    neumann,
    dirichlet,
    inflow_interface,  // bottom of a slab that is not the initial time
    outflow_interface, // top of a slab that is not the final time
};

const char* to_string(BoundaryTag tag);

/// Axis-aligned box in the global integer lattice (t, x, y).
struct LatticeBox {
    std::array<long, 3> lo{0, 0, 0};
    long size = kRootSize;

    bool contains(const std::array<long, 3>& lo2, long size2) const;
};

/// Hexahedral space-time element with trilinear corner mapping.
///
/// Corner c has lattice offset bits (c>>2 & 1, c>>1 & 1, c & 1) along (t, x, y).
struct Element {
    LatticeBox box;
    int level = 0;
    std::array<Vec3, 8> corners;
    double h = 0.0;        // max edge length of the bottom spatial cell
    double dt = 0.0;       // own time extent
    double slab_dt = 0.0;  // time step of the containing root layer
    std::array<std::vector<int>, 6> face_facets; // face 2*axis+side -> facets
};

struct Facet {
    int axis = 0;   // normal lattice axis, 0 = time
    LatticeBox box; // lo[axis] is the facet plane; the normal extent is unused
    FacetKind kind = FacetKind::R;
    BoundaryTag tag = BoundaryTag::interior;
    int side = -1; // spatial side for lateral boundary facets
    std::array<int, 2> owner{-1, -1};
    std::array<int, 2> face{-1, -1}; // local face index in each owner
    int coarse_slot = -1;            // owner slot whose face is larger (hanging)
    int child = -1;                  // quarter of the coarse face occupied

    bool boundary() const { return owner[1] < 0; }
    bool has_dofs() const
    {
        return tag != BoundaryTag::dirichlet && tag != BoundaryTag::outflow_interface;
    }
    /// Free lattice axes spanning the facet, in facet reference order.
    std::array<int, 2> free_axes() const;
};

/// Spatial layout of the top of a previous slab, for matching inflow facets.
struct InterfaceLayout {
    std::vector<LatticeBox> boxes; // lo[0] and the time extent are ignored
};

/// Mesh of one or more root time layers over a deforming domain.
class SpaceTimeMesh {
public:
    UniformGrid grid;
    DeformationMap deformation;
    std::vector<double> times; // root layer boundaries
    double final_time = 1.0;
    std::vector<Element> elements;
    std::vector<Facet> facets;

    int num_layers() const { return static_cast<int>(times.size()) - 1; }
    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }
    bool starts_at_zero() const;
    bool ends_at_final() const;

    /// Lattice coordinates to (t, x1, x2) via the root trilinear maps.
    Vec3 map_lattice(const Vec3& p) const;
    /// Uniform coordinates of a lattice point's spatial part.
    Vec2 uniform_coords(double lx, double ly) const;
    double lattice_time(double lt) const;

    /// Root trilinear map restricted to the element box.
    Element make_element(const LatticeBox& box) const;

    /// Element whose box contains the lattice point (ties go to the first found).
    int locate(const Vec3& lattice_point) const;

    /// Top-face spatial boxes, for building the next slab.
    InterfaceLayout top_layout() const;

    long lattice_extent(int axis) const;

    /// Facets were built by facet_topology.
    bool has_topology() const { return topology_built_; }
    void set_topology_built(bool v) { topology_built_ = v; }

    std::vector<std::vector<int>>& root_leaves() { return root_leaves_; }
    const std::vector<std::vector<int>>& root_leaves() const { return root_leaves_; }
    int root_index(long it, long ix, long iy) const
    {
        return static_cast<int>((it * grid.nx + ix) * grid.ny + iy);
    }
    void rebuild_root_index();

private:
    Vec3 node(int it, int ix, int iy) const;
    bool topology_built_ = false;
    std::vector<std::vector<int>> root_leaves_;
};

struct MeshOptions {
    BoundaryPartition partition;
    const InterfaceLayout* lower = nullptr; // top of the previous slab
};

/// One root layer over [t_n, t_next].
SpaceTimeMesh build_slab(const UniformGrid& grid, double t_n, double t_next,
                         const DeformationMap& deformation, double final_time,
                         const MeshOptions& options = {});

/// Several root layers over the given time levels.
SpaceTimeMesh build_mesh(const UniformGrid& grid, const std::vector<double>& times,
                         const DeformationMap& deformation, double final_time,
                         const MeshOptions& options = {});

/// Isotropic octasection of the marked elements plus 1-irregularity closure.
SpaceTimeMesh refine_elements(const SpaceTimeMesh& mesh, const std::vector<int>& marked,
                              const MeshOptions& options = {});

/// Rebuild the facet list and the per-element face lists.
void facet_topology(SpaceTimeMesh& mesh, const MeshOptions& options = {});

struct Violation {
    std::string kind;
    long element = -1;
    double value = 0.0;
};

struct MeshDiagnostics {
    double min_det_j = 0.0, max_det_j = 0.0;
    double min_surface = 0.0, max_surface = 0.0;
    int max_level_jump = 0;
    double max_dt_over_h = 0.0;
    double max_slab_ratio = 0.0;
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

MeshDiagnostics validate(const SpaceTimeMesh& mesh, double slab_ratio_bound = 2.0);

/// Legacy VTK unstructured grid with one hexahedron per element.
///
/// Point data is sampled per element corner from `point_values` (8 per element,
/// corner order as in Element) when non-empty.
void write_vtk(const std::string& path, const SpaceTimeMesh& mesh,
               const std::vector<double>& point_values = {},
               const std::string& field_name = "u_h");

} // namespace sthdg
