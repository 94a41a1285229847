#include "sthdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/quadrature.hpp"

namespace sthdg {

Vec2 deform_point(const Vec2& xu, double t, double amplitude)
{
    const double two_pi = 2.0 * std::numbers::pi;
    // x* swaps the uniform coordinates.
    return {xu[0] + amplitude * (0.5 - xu[0]) * std::sin(two_pi * (0.5 - xu[1] + t)),
            xu[1] + amplitude * (0.5 - xu[1]) * std::sin(two_pi * (0.5 - xu[0] + t))};
}

const char* to_string(BoundaryTag tag)
{
    switch (tag) {
    case BoundaryTag::interior: return "interior";
    case BoundaryTag::neumann: return "neumann";
    case BoundaryTag::dirichlet: return "dirichlet";
    case BoundaryTag::inflow_interface: return "inflow_interface";
    case BoundaryTag::outflow_interface: return "outflow_interface";
    }
    return "?";
}

bool LatticeBox::contains(const std::array<long, 3>& lo2, long size2) const
{
    for (int a = 0; a < 3; ++a)
        if (lo2[a] < lo[a] || lo2[a] + size2 > lo[a] + size)
            return false;
    return true;
}

std::array<int, 2> Facet::free_axes() const
{
    switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
    }
}

bool SpaceTimeMesh::starts_at_zero() const { return std::abs(times.front()) <= 1e-14; }

bool SpaceTimeMesh::ends_at_final() const
{
    return std::abs(times.back() - final_time) <= 1e-12 * std::max(1.0, std::abs(final_time));
}

long SpaceTimeMesh::lattice_extent(int axis) const
{
    const long n = axis == 0 ? num_layers() : (axis == 1 ? grid.nx : grid.ny);
    return n * kRootSize;
}

Vec2 SpaceTimeMesh::uniform_coords(double lx, double ly) const
{
    const double fx = lx / (double(kRootSize) * grid.nx);
    const double fy = ly / (double(kRootSize) * grid.ny);
    return {grid.lo[0] + fx * (grid.hi[0] - grid.lo[0]), grid.lo[1] + fy * (grid.hi[1] - grid.lo[1])};
}

double SpaceTimeMesh::lattice_time(double lt) const
{
    const int layers = num_layers();
    int k = std::clamp(static_cast<int>(std::floor(lt / kRootSize)), 0, layers - 1);
    const double u = lt / kRootSize - k;
    return times[k] + u * (times[k + 1] - times[k]);
}

Vec3 SpaceTimeMesh::node(int it, int ix, int iy) const
{
    const Vec2 xu = uniform_coords(double(ix) * kRootSize, double(iy) * kRootSize);
    const double t = times[it];
    const Vec2 x = deformation(xu, t);
    return {t, x[0], x[1]};
}

Vec3 SpaceTimeMesh::map_lattice(const Vec3& p) const
{
    const int n[3] = {num_layers(), grid.nx, grid.ny};
    int r[3];
    double u[3];
    for (int a = 0; a < 3; ++a) {
        r[a] = std::clamp(static_cast<int>(std::floor(p[a] / kRootSize)), 0, n[a] - 1);
        u[a] = p[a] / kRootSize - r[a];
    }
    Vec3 x = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
        const int b[3] = {(c >> 2) & 1, (c >> 1) & 1, c & 1};
        const double w = (b[0] ? u[0] : 1.0 - u[0]) * (b[1] ? u[1] : 1.0 - u[1]) *
                         (b[2] ? u[2] : 1.0 - u[2]);
        x += w * node(r[0] + b[0], r[1] + b[1], r[2] + b[2]);
    }
    return x;
}

Element SpaceTimeMesh::make_element(const LatticeBox& box) const
{
    Element e;
    e.box = box;
    int level = 0;
    for (long s = kRootSize; s > box.size; s /= 2)
        ++level;
    e.level = level;
    for (int c = 0; c < 8; ++c) {
        const Vec3 p(double(box.lo[0] + ((c >> 2) & 1) * box.size),
                     double(box.lo[1] + ((c >> 1) & 1) * box.size),
                     double(box.lo[2] + (c & 1) * box.size));
        e.corners[c] = map_lattice(p);
    }
    // Bottom cell edges: 0-2, 2-3, 3-1, 1-0.
    const int edges[4][2] = {{0, 2}, {2, 3}, {3, 1}, {1, 0}};
    e.h = 0.0;
    for (const auto& ed : edges)
        e.h = std::max(e.h, (e.corners[ed[0]].tail<2>() - e.corners[ed[1]].tail<2>()).norm());
    e.dt = e.corners[4][0] - e.corners[0][0];
    const int layer = static_cast<int>(box.lo[0] / kRootSize);
    e.slab_dt = times[layer + 1] - times[layer];
    return e;
}

void SpaceTimeMesh::rebuild_root_index()
{
    root_leaves_.assign(static_cast<std::size_t>(num_layers()) * grid.nx * grid.ny, {});
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& lo = elements[i].box.lo;
        root_leaves_[root_index(lo[0] / kRootSize, lo[1] / kRootSize, lo[2] / kRootSize)].push_back(
            static_cast<int>(i));
    }
}

int SpaceTimeMesh::locate(const Vec3& p) const
{
    const long n[3] = {num_layers(), grid.nx, grid.ny};
    long r[3];
    for (int a = 0; a < 3; ++a) {
        if (p[a] < 0.0 || p[a] > double(n[a] * kRootSize))
            return -1;
        r[a] = std::clamp(static_cast<long>(std::floor(p[a] / kRootSize)), 0L, n[a] - 1);
    }
    for (int id : root_leaves_[root_index(r[0], r[1], r[2])]) {
        const auto& b = elements[id].box;
        bool inside = true;
        for (int a = 0; a < 3 && inside; ++a)
            inside = p[a] >= double(b.lo[a]) && p[a] <= double(b.lo[a] + b.size);
        if (inside)
            return id;
    }
    return -1;
}

InterfaceLayout SpaceTimeMesh::top_layout() const
{
    InterfaceLayout layout;
    const long top = lattice_extent(0);
    for (const auto& e : elements)
        if (e.box.lo[0] + e.box.size == top)
            layout.boxes.push_back(e.box);
    return layout;
}

namespace {

void check_geometry(const SpaceTimeMesh& mesh)
{
    const auto rule = gauss_rule(3);
    for (std::size_t i = 0; i < mesh.elements.size(); ++i)
        for (double a : rule.points)
            for (double b : rule.points)
                for (double c : rule.points)
                    geometry(mesh.elements[i], Vec3(a, b, c), static_cast<long>(i));
}

// Elements across face f of element e; empty on the mesh boundary.
std::vector<int> across(const SpaceTimeMesh& mesh, int e, int f)
{
    const auto& box = mesh.elements[e].box;
    const int axis = f / 2;
    const bool upper = f % 2 == 1;
    const long plane = box.lo[axis] + (upper ? box.size : 0);
    if (plane == 0 || plane == mesh.lattice_extent(axis))
        return {};
    long r[3] = {box.lo[0] / kRootSize, box.lo[1] / kRootSize, box.lo[2] / kRootSize};
    r[axis] = (upper ? plane : plane - 1) / kRootSize;
    std::vector<int> out;
    for (int id : mesh.root_leaves()[mesh.root_index(r[0], r[1], r[2])]) {
        const auto& nb = mesh.elements[id].box;
        const bool touches = upper ? nb.lo[axis] == plane : nb.lo[axis] + nb.size == plane;
        if (!touches)
            continue;
        bool overlap = true;
        for (int a = 0; a < 3 && overlap; ++a) {
            if (a == axis)
                continue;
            overlap = nb.lo[a] < box.lo[a] + box.size && box.lo[a] < nb.lo[a] + nb.size;
        }
        if (overlap)
            out.push_back(id);
    }
    return out;
}

int child_index(const LatticeBox& fine, const LatticeBox& coarse, const std::array<int, 2>& free)
{
    const int b1 = (fine.lo[free[0]] - coarse.lo[free[0]]) >= coarse.size / 2 ? 1 : 0;
    const int b2 = (fine.lo[free[1]] - coarse.lo[free[1]]) >= coarse.size / 2 ? 1 : 0;
    return b1 * 2 + b2;
}

LatticeBox face_box(const LatticeBox& box, int f)
{
    LatticeBox fb = box;
    const int axis = f / 2;
    fb.lo[axis] = box.lo[axis] + (f % 2 == 1 ? box.size : 0);
    return fb;
}

void check_times(const std::vector<double>& times)
{
    if (times.size() < 2)
        throw DomainError("mesh needs at least one time interval");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw DomainError("time levels must be strictly increasing");
}

} // namespace

SpaceTimeMesh build_mesh(const UniformGrid& grid, const std::vector<double>& times,
                         const DeformationMap& deformation, double final_time, const MeshOptions& options)
{
    check_times(times);
    if (grid.nx < 1 || grid.ny < 1)
        throw DomainError("spatial grid needs at least one cell per direction");
    if (!(grid.hi[0] > grid.lo[0]) || !(grid.hi[1] > grid.lo[1]))
        throw DomainError("empty spatial box");
    SpaceTimeMesh mesh;
    mesh.grid = grid;
    mesh.deformation = deformation;
    mesh.times = times;
    mesh.final_time = final_time;
    const int layers = mesh.num_layers();
    mesh.elements.reserve(static_cast<std::size_t>(layers) * grid.nx * grid.ny);
    for (int it = 0; it < layers; ++it)
        for (int ix = 0; ix < grid.nx; ++ix)
            for (int iy = 0; iy < grid.ny; ++iy) {
                LatticeBox box;
                box.lo = {it * kRootSize, ix * kRootSize, iy * kRootSize};
                box.size = kRootSize;
                mesh.elements.push_back(mesh.make_element(box));
            }
    check_geometry(mesh);
    mesh.rebuild_root_index();
    facet_topology(mesh, options);
    return mesh;
}

SpaceTimeMesh build_slab(const UniformGrid& grid, double t_n, double t_next,
                         const DeformationMap& deformation, double final_time, const MeshOptions& options)
{
    return build_mesh(grid, {t_n, t_next}, deformation, final_time, options);
}

SpaceTimeMesh refine_elements(const SpaceTimeMesh& mesh, const std::vector<int>& marked,
                              const MeshOptions& options)
{
    const std::size_t n = mesh.elements.size();
    std::vector<char> refine(n, 0);
    for (int id : marked) {
        if (id < 0 || static_cast<std::size_t>(id) >= n)
            throw ContractError("refine_elements: marked element out of range");
        refine[id] = 1;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (refine[i] && mesh.elements[i].box.size < 2)
            throw ConfigurationError("refine_elements: maximum refinement level reached");

    auto target = [&](std::size_t i) {
        return refine[i] ? mesh.elements[i].box.size / 2 : mesh.elements[i].box.size;
    };
    // Closure: refine any element whose neighbour would end up two levels finer.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (refine[i])
                continue;
            for (int f = 0; f < 6 && !refine[i]; ++f)
                for (int nb : across(mesh, static_cast<int>(i), f))
                    if (2 * target(nb) < target(i)) {
                        refine[i] = 1;
                        changed = true;
                        break;
                    }
        }
    }

    SpaceTimeMesh out;
    out.grid = mesh.grid;
    out.deformation = mesh.deformation;
    out.times = mesh.times;
    out.final_time = mesh.final_time;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = mesh.elements[i];
        if (!refine[i]) {
            Element copy = e;
            for (auto& ff : copy.face_facets)
                ff.clear();
            out.elements.push_back(std::move(copy));
            continue;
        }
        const long half = e.box.size / 2;
        for (int c = 0; c < 8; ++c) {
            LatticeBox box;
            box.size = half;
            box.lo = {e.box.lo[0] + ((c >> 2) & 1) * half, e.box.lo[1] + ((c >> 1) & 1) * half,
                      e.box.lo[2] + (c & 1) * half};
            out.elements.push_back(out.make_element(box));
        }
    }
    check_geometry(out);
    out.rebuild_root_index();
    facet_topology(out, options);
    return out;
}

void facet_topology(SpaceTimeMesh& mesh, const MeshOptions& options)
{
    mesh.facets.clear();
    for (auto& e : mesh.elements)
        for (auto& ff : e.face_facets)
            ff.clear();
    if (mesh.root_leaves().empty())
        mesh.rebuild_root_index();

    const int ne = static_cast<int>(mesh.elements.size());
    for (int e = 0; e < ne; ++e) {
        const auto& box = mesh.elements[e].box;
        for (int f = 0; f < 6; ++f) {
            const int axis = f / 2;
            const bool upper = f % 2 == 1;
            Facet facet;
            facet.axis = axis;
            facet.kind = axis == 0 ? FacetKind::R : FacetKind::Q;
            facet.box = face_box(box, f);
            const auto nbs = across(mesh, e, f);

            if (nbs.empty()) {
                const long plane = facet.box.lo[axis];
                if (plane != 0 && plane != mesh.lattice_extent(axis))
                    throw TopologyError("element " + std::to_string(e) + " face " + std::to_string(f) +
                                        " has no neighbour inside the mesh");
                facet.owner = {e, -1};
                facet.face = {f, -1};
                if (axis == 0) {
                    if (upper) {
                        facet.tag = mesh.ends_at_final() ? BoundaryTag::neumann
                                                         : BoundaryTag::outflow_interface;
                    } else if (mesh.starts_at_zero()) {
                        facet.tag = BoundaryTag::neumann;
                    } else {
                        facet.tag = BoundaryTag::inflow_interface;
                        if (options.lower) {
                            // Match the previous slab's top faces.
                            std::vector<LatticeBox> hits;
                            for (const auto& lb : options.lower->boxes) {
                                const bool ox = lb.lo[1] < box.lo[1] + box.size && box.lo[1] < lb.lo[1] + lb.size;
                                const bool oy = lb.lo[2] < box.lo[2] + box.size && box.lo[2] < lb.lo[2] + lb.size;
                                if (ox && oy)
                                    hits.push_back(lb);
                            }
                            if (hits.empty())
                                throw TopologyError("inflow face of element " + std::to_string(e) +
                                                    " does not match the previous slab");
                            if (hits.size() == 1) {
                                if (hits[0].size > 2 * box.size)
                                    throw TopologyError("inflow interface of element " + std::to_string(e) +
                                                        " is more than one level coarser below");
                            } else {
                                if (hits.size() != 4)
                                    throw TopologyError("inflow interface of element " + std::to_string(e) +
                                                        " is not 1-irregular");
                                for (const auto& lb : hits) {
                                    if (lb.size * 2 != box.size)
                                        throw TopologyError("inflow interface of element " + std::to_string(e) +
                                                            " is not 1-irregular");
                                    Facet sub = facet;
                                    sub.box.size = lb.size;
                                    sub.box.lo[1] = lb.lo[1];
                                    sub.box.lo[2] = lb.lo[2];
                                    sub.coarse_slot = 0;
                                    sub.child = child_index(sub.box, facet.box, sub.free_axes());
                                    mesh.facets.push_back(sub);
                                }
                                continue;
                            }
                        }
                    }
                } else {
                    facet.side = axis == 1 ? (upper ? int(Side::right) : int(Side::left))
                                           : (upper ? int(Side::top) : int(Side::bottom));
                    facet.tag = options.partition.is_dirichlet(facet.side) ? BoundaryTag::dirichlet
                                                                           : BoundaryTag::neumann;
                }
                mesh.facets.push_back(facet);
                continue;
            }

            const long se = box.size;
            if (nbs.size() == 1) {
                const int nb = nbs[0];
                const long sn = mesh.elements[nb].box.size;
                const int nf = 2 * axis + (upper ? 0 : 1);
                if (sn == se) {
                    if (!upper)
                        continue; // created from the lower side
                    facet.owner = {e, nb};
                    facet.face = {f, nf};
                } else if (sn == 2 * se) {
                    if (upper) {
                        facet.owner = {e, nb};
                        facet.face = {f, nf};
                        facet.coarse_slot = 1;
                    } else {
                        facet.owner = {nb, e};
                        facet.face = {nf, f};
                        facet.coarse_slot = 0;
                    }
                    facet.child = child_index(facet.box, face_box(mesh.elements[nb].box, nf), facet.free_axes());
                } else {
                    throw TopologyError("elements " + std::to_string(e) + " and " + std::to_string(nb) +
                                        " differ by more than one refinement level");
                }
                facet.tag = BoundaryTag::interior;
                mesh.facets.push_back(facet);
                continue;
            }

            // Finer neighbours create the sub-facets.
            if (nbs.size() != 4)
                throw TopologyError("element " + std::to_string(e) + " face " + std::to_string(f) +
                                    " is neither conforming nor 1-irregular");
            for (int nb : nbs)
                if (mesh.elements[nb].box.size * 2 != se)
                    throw TopologyError("element " + std::to_string(e) + " face " + std::to_string(f) +
                                        " is neither conforming nor 1-irregular");
        }
    }

    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& facet = mesh.facets[i];
        for (int k = 0; k < 2; ++k)
            if (facet.owner[k] >= 0)
                mesh.elements[facet.owner[k]].face_facets[facet.face[k]].push_back(static_cast<int>(i));
    }
    mesh.set_topology_built(true);
}

MeshDiagnostics validate(const SpaceTimeMesh& mesh, double slab_ratio_bound)
{
    MeshDiagnostics d;
    d.min_det_j = d.min_surface = std::numeric_limits<double>::infinity();
    d.max_det_j = d.max_surface = -std::numeric_limits<double>::infinity();
    const auto rule = gauss_rule(4);
    for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
        const auto& e = mesh.elements[i];
        bool inverted = false;
        for (double a : rule.points)
            for (double b : rule.points)
                for (double c : rule.points) {
                    MappedGeometry g;
                    try {
                        g = geometry(e, Vec3(a, b, c), static_cast<long>(i));
                    } catch (const GeometryError&) {
                        inverted = true;
                        continue;
                    }
                    d.min_det_j = std::min(d.min_det_j, g.det);
                    d.max_det_j = std::max(d.max_det_j, g.det);
                }
        if (inverted)
            d.violations.push_back({"det_j", static_cast<long>(i), 0.0});
        for (int f = 0; f < 6; ++f)
            for (double a : rule.points)
                for (double b : rule.points) {
                    try {
                        const auto m = face_measure(e, f, face_point(f, Vec2(a, b)), static_cast<long>(i));
                        d.min_surface = std::min(d.min_surface, m.factor);
                        d.max_surface = std::max(d.max_surface, m.factor);
                    } catch (const GeometryError&) {
                        d.violations.push_back({"surface", static_cast<long>(i), 0.0});
                    }
                }
        const double ratio = e.dt / e.h;
        d.max_dt_over_h = std::max(d.max_dt_over_h, ratio);
        if (ratio > 1.0 + 1e-12)
            d.violations.push_back({"dt_le_h", static_cast<long>(i), ratio});
        const double sr = e.slab_dt / e.dt;
        d.max_slab_ratio = std::max(d.max_slab_ratio, sr);
        if (sr > slab_ratio_bound + 1e-12)
            d.violations.push_back({"slab_ratio", static_cast<long>(i), sr});
    }
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& f = mesh.facets[i];
        if (f.coarse_slot >= 0 && (f.child < 0 || f.child > 3))
            d.violations.push_back({"dangling_hanging_facet", static_cast<long>(i), 0.0});
        if (f.owner[1] < 0)
            continue;
        const int jump = std::abs(mesh.elements[f.owner[0]].level - mesh.elements[f.owner[1]].level);
        d.max_level_jump = std::max(d.max_level_jump, jump);
        if (jump > 1)
            d.violations.push_back({"level_jump", static_cast<long>(i), double(jump)});
    }
    return d;
}

void write_vtk(const std::string& path, const SpaceTimeMesh& mesh, const std::vector<double>& point_values,
               const std::string& field_name)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path);
    const std::size_t ne = mesh.elements.size();
    if (!point_values.empty() && point_values.size() != 8 * ne)
        throw ContractError("write_vtk: expected 8 point values per element");
    out.precision(17);
    out << "# vtk DataFile Version 3.0\nspace-time slab\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << 8 * ne << " double\n";
    // VTK hexahedron order: bottom quad counter-clockwise, then top.
    const int order[8] = {0, 2, 3, 1, 4, 6, 7, 5};
    for (const auto& e : mesh.elements)
        for (int k : order)
            out << e.corners[k][1] << ' ' << e.corners[k][2] << ' ' << e.corners[k][0] << '\n';
    out << "CELLS " << ne << ' ' << 9 * ne << '\n';
    for (std::size_t i = 0; i < ne; ++i) {
        out << 8;
        for (int k = 0; k < 8; ++k)
            out << ' ' << 8 * i + k;
        out << '\n';
    }
    out << "CELL_TYPES " << ne << '\n';
    for (std::size_t i = 0; i < ne; ++i)
        out << "12\n";
    out << "CELL_DATA " << ne << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
    for (const auto& e : mesh.elements)
        out << e.level << '\n';
    if (!point_values.empty()) {
        out << "POINT_DATA " << 8 * ne << "\nSCALARS " << field_name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < ne; ++i)
            for (int k : order)
                out << point_values[8 * i + k] << '\n';
    }
}

} // namespace sthdg
