#include "sthdg/solution.hpp"

#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"

namespace sthdg {

std::array<int, 2> facet_degrees(const Facet& facet, int p_t, int p_s)
{
    if (facet.kind == FacetKind::Q)
        return {p_t, p_s};
    return {p_s, p_s};
}

TraceLayout make_layout(const SpaceTimeMesh& mesh, int p_t, int p_s)
{
    TraceLayout layout;
    layout.p_t = p_t;
    layout.p_s = p_s;
    layout.offset.assign(mesh.facets.size(), -1);
    layout.count.assign(mesh.facets.size(), 0);
    int next = 0;
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& f = mesh.facets[i];
        if (!f.has_dofs())
            continue;
        const auto q = facet_degrees(f, p_t, p_s);
        layout.offset[i] = next;
        layout.count[i] = (q[0] + 1) * (q[1] + 1);
        next += layout.count[i];
    }
    layout.total = next;
    return layout;
}

ElementTraceMap element_trace_map(const SpaceTimeMesh& mesh, const TraceLayout& layout, int element)
{
    ElementTraceMap m;
    const auto& e = mesh.elements[element];
    for (int f = 0; f < 6; ++f)
        for (int id : e.face_facets[f]) {
            if (layout.offset[id] < 0)
                continue;
            const auto& facet = mesh.facets[id];
            const int slot = facet.owner[0] == element && facet.face[0] == f ? 0 : 1;
            m.facets.push_back(id);
            m.slots.push_back(slot);
            m.local.push_back(m.size());
            for (int k = 0; k < layout.count[id]; ++k)
                m.global.push_back(layout.offset[id] + k);
        }
    return m;
}

double eval_element(const TensorBasis& basis, const Vector& c, const Vec3& xi)
{
    Vector v;
    basis.eval(xi, v);
    return v.dot(c);
}

double eval_trace(const SlabSolution& slab, int facet, const Vec2& s)
{
    const int off = slab.layout.offset[facet];
    if (off < 0)
        return 0.0;
    const auto q = facet_degrees(slab.mesh->facets[facet], slab.layout.p_t, slab.layout.p_s);
    FacetBasis fb(q[0], q[1]);
    Vector v;
    fb.eval(s, v);
    return v.dot(slab.lambda.segment(off, fb.size()));
}

InflowTrace::InflowTrace(const SlabSolution& previous, int p_t, int p_s)
    : prev_(&previous), basis_(p_t, p_s)
{
}

double InflowTrace::operator()(double lx, double ly) const
{
    const auto& mesh = *prev_->mesh;
    const Vec3 p(double(mesh.lattice_extent(0)), lx, ly);
    const int e = mesh.locate(p);
    if (e < 0)
        throw TopologyError("inflow point outside the previous slab");
    Vec3 xi = element_coords(mesh.elements[e].box, p);
    xi[0] = 1.0;
    return eval_element(basis_, prev_->u[e], xi);
}

} // namespace sthdg
