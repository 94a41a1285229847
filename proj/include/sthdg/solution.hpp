#pragma once

#include <array>
#include <memory>
#include <vector>

#include "sthdg/basis.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/types.hpp"

namespace sthdg {

/// Trace basis degrees (q1, q2) of a facet, in facet reference order.
///
/// Q-facets carry (p_t, p_s) with time first; R-facets carry (p_s, p_s).
std::array<int, 2> facet_degrees(const Facet& facet, int p_t, int p_s);

/// Global trace-dof numbering; facets without unknowns get offset -1.
struct TraceLayout {
    int p_t = 0, p_s = 0;
    std::vector<int> offset;
    std::vector<int> count;
    int total = 0;
};

TraceLayout make_layout(const SpaceTimeMesh& mesh, int p_t, int p_s);

/// Element-local trace numbering: facets met in face order 0..5.
struct ElementTraceMap {
    std::vector<int> facets;  // facet ids with unknowns
    std::vector<int> slots;   // owner slot of this element
    std::vector<int> local;   // first local trace index per listed facet
    std::vector<int> global;  // global dof per local trace index
    int size() const { return static_cast<int>(global.size()); }
};

ElementTraceMap element_trace_map(const SpaceTimeMesh& mesh, const TraceLayout& layout, int element);

/// Discrete solution on one slab.
struct SlabSolution {
    std::shared_ptr<const SpaceTimeMesh> mesh;
    TraceLayout layout;
    std::vector<Vector> u; // modal coefficients per element
    Vector lambda;         // trace unknowns
};

struct Solution {
    int p_t = 0, p_s = 0;
    std::vector<SlabSolution> slabs;
};

double eval_element(const TensorBasis& basis, const Vector& coefficients, const Vec3& xi);

/// Trace value on a facet at facet-square coordinates s.
double eval_trace(const SlabSolution& slab, int facet, const Vec2& s);

/// Evaluates u_h from a slab at the top of its time range, for the next slab's inflow.
class InflowTrace {
public:
    InflowTrace(const SlabSolution& previous, int p_t, int p_s);
    /// u_h at the lattice spatial point (lx, ly) on the previous slab's top.
    double operator()(double lx, double ly) const;

private:
    const SlabSolution* prev_;
    TensorBasis basis_;
};

} // namespace sthdg
