#pragma once

#include <functional>
#include <string>

#include "sthdg/mesh.hpp"
#include "sthdg/types.hpp"

namespace sthdg {

/// Inflow indicator; the tie beta.n = 0 counts as outflow.
inline double zeta_minus(double beta_n) { return beta_n < 0.0 ? 1.0 : 0.0; }
inline double zeta_plus(double beta_n) { return 1.0 - zeta_minus(beta_n); }

/// A point on the space-time boundary with its outward unit normal.
struct BoundaryPoint {
    double t = 0.0;
    Vec2 x = Vec2::Zero();
    Vec3 normal = Vec3::Zero();
    int side = -1; // spatial side, or -1 on Omega(0) and Omega(T)
};

/// Advection-diffusion problem  div(beta u) - eps lap u = f  on a deforming domain,
/// with beta = (1, beta_bar).
struct ProblemSpec {
    std::string name;
    double epsilon = 1.0;
    double final_time = 1.0;
    UniformGrid domain; // cell counts are ignored
    DeformationMap deformation;
    BoundaryPartition partition;

    std::function<Vec2(double, const Vec2&)> beta_bar;
    std::function<double(double, const Vec2&)> forcing;
    /// Neumann data g; derived from the exact solution when empty.
    std::function<double(const BoundaryPoint&)> neumann;
    std::function<double(double, const Vec2&)> exact;
    /// (u_t, u_x1, u_x2) of the exact solution.
    std::function<Vec3(double, const Vec2&)> exact_grad;

    Vec3 beta(double t, const Vec2& x) const;
    double f(double t, const Vec2& x) const { return forcing ? forcing(t, x) : 0.0; }
    bool has_exact() const { return static_cast<bool>(exact) && static_cast<bool>(exact_grad); }
    bool has_neumann() const { return static_cast<bool>(neumann) || has_exact(); }

    /// g = -zeta^- u beta.n + eps grad u . n_bar on the Neumann boundary.
    double neumann_data(const BoundaryPoint& p) const;
};

/// g from an exact solution: -zeta^- u beta.n + eps grad_x u . n_bar.
double neumann_from_exact(const ProblemSpec& problem, const BoundaryPoint& p);

/// max |div beta_bar| by central differences at random points of the uniform box.
double sample_divergence(const ProblemSpec& problem, int samples, unsigned seed, double step = 1e-5);

/// max |u_t + div(beta_bar u) - eps lap u - f| by central differences at random
/// interior points.
double sample_pde_residual(const ProblemSpec& problem, int samples, unsigned seed, double step = 1e-4);

} // namespace sthdg
