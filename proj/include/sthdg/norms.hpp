#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "sthdg/basis.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/problem.hpp"
#include "sthdg/solution.hpp"

namespace sthdg {

enum class Regime { d, x, c };

const char* to_string(Regime r);

struct TauEps {
    double value = 0.0;
    Regime regime = Regime::c;
};

/// d: dt <= h <= eps, x: dt <= eps < h, c: eps < dt <= h.
///
/// For dt > h (possible on deformed cells) the h-vs-eps test decides first.
TauEps tau_eps(double dt, double h, double slab_dt, double epsilon);
TauEps tau_eps(const Element& element, double epsilon);

/// sup_F |beta.n| sampled on an equispaced (2n+1)^2 grid with endpoints plus the
/// Gauss points of each listed rule size.
double beta_s(const SpaceTimeMesh& mesh, const Facet& facet, const ProblemSpec& problem, int n,
              const std::vector<int>& gauss_sizes);

/// beta_s for every facet at the oversampling the solver and the error norms use.
std::vector<double> facet_beta_s(const SpaceTimeMesh& mesh, const ProblemSpec& problem, int p_t, int p_s,
                                 int oversample = 2);

/// Assembly quadrature size per direction.
inline int assembly_points(int p_t, int p_s) { return std::max(p_t, p_s) + 2; }
/// Error-norm quadrature size per direction.
inline int error_points(int p_t, int p_s) { return std::max(p_t, p_s) + 3; }

Matrix element_mass(const SpaceTimeMesh& mesh, int element, const TensorBasis& basis, int nq);
Matrix facet_mass(const SpaceTimeMesh& mesh, int facet, const FacetBasis& basis, int nq);

/// L2 projection onto V_h on one element of a function of (xi, X).
Vector project_volume(const SpaceTimeMesh& mesh, int element, const TensorBasis& basis,
                      const std::function<double(const Vec3& xi, const Vec3& x)>& target, int nq);

/// L2 projection onto M_h on one facet of a function of (s, X).
Vector project_facet(const SpaceTimeMesh& mesh, int facet, const FacetBasis& basis,
                     const std::function<double(const Vec2& s, const Vec3& x)>& target, int nq);

/// Squared norm contributions.
struct NormBreakdown {
    double volume = 0.0;         // sum ||v||_K^2
    double advective_jump = 0.0; // |beta_s - beta.n/2| [v]^2 over element boundaries
    double neumann = 0.0;        // |beta.n/2| mu^2 over the Neumann boundary
    double diffusive_grad = 0.0; // eps ||grad_x v||^2
    double diffusive_jump = 0.0; // eps/h ||[v]||^2 over Q faces
    double time_derivative = 0.0; // tau_eps ||d_t v||^2
    double streamline = 0.0;      // dt h^2/(dt+h) ||Pi_h(beta.grad v)||^2

    double v2() const { return volume + advective_jump + neumann + diffusive_grad + diffusive_jump; }
    double s2() const { return v2() + time_derivative; }
    double ss2() const { return s2() + streamline; }
    double v() const;
    double s() const;
    double ss() const;

    NormBreakdown& operator+=(const NormBreakdown& o);
};

/// Pointwise access to a pair (v, mu) over a sequence of slabs.
struct PairEvaluator {
    /// v and its physical gradient (d_t, d_x1, d_x2) in an element.
    std::function<void(int slab, int element, const Vec3& xi, const Vec3& x, const MappedGeometry& g, double& v,
                       Vec3& grad)>
        element;
    /// mu on a facet at facet-square coordinates s.
    std::function<double(int slab, int facet, const Vec2& s, const Vec3& x)> trace;
};

using MeshList = std::vector<std::shared_ptr<const SpaceTimeMesh>>;

MeshList meshes_of(const Solution& solution);

/// The three norms of a pair over consecutive slabs. On a slab top that is not
/// the final time, mu is read from the next slab's inflow facets.
NormBreakdown evaluate_norms(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair,
                             int p_t, int p_s, int nq);

PairEvaluator discrete_pair(const Solution& solution);
PairEvaluator exact_pair(const ProblemSpec& problem);
/// a - b pointwise.
PairEvaluator difference(PairEvaluator a, PairEvaluator b);
/// c * a pointwise.
PairEvaluator scaled(PairEvaluator a, double c);

double norm_v(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s);
double norm_s(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s);
double norm_ss(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s);

struct ErrorReport {
    NormBreakdown breakdown;
    long cells_per_slab = 0; // max over slabs
    int num_slabs = 0;
    double error_v = 0.0, error_s = 0.0, error_ss = 0.0;
};

/// Norms of (u - u_h, u|Gamma - lambda_h) with error quadrature.
ErrorReport error_report(const Solution& solution, const ProblemSpec& problem);

/// rate_i = log2(e_{i-1} / e_i).
std::vector<double> rates(const std::vector<double>& errors);

/// Quadratic forms of the norm components on one mesh.
///
/// Unknowns are ordered [u (element-major), lambda (layout order)].
struct NormGram {
    std::array<Eigen::SparseMatrix<double>, 7> parts;
    int num_u = 0;
    int num_lambda = 0;

    Eigen::SparseMatrix<double> v() const;
    Eigen::SparseMatrix<double> s() const;
    Eigen::SparseMatrix<double> ss() const;
    NormBreakdown breakdown(const Vector& x) const;
};

NormGram assemble_norm_gram(const SpaceTimeMesh& mesh, const TraceLayout& layout, const ProblemSpec& problem,
                            int nq);

} // namespace sthdg
