#pragma once

#include <vector>

#include "sthdg/types.hpp"

namespace sthdg {

/// Gauss-Legendre rule on (-1, 1).
struct QuadratureRule {
    std::vector<double> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
QuadratureRule gauss_rule(int n);

struct QuadratureRule2D {
    std::vector<Vec2> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
};

struct QuadratureRule3D {
    std::vector<Vec3> points; // (t, x1, x2)
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
};

QuadratureRule2D tensor_rule_2d(int n1, int n2);
QuadratureRule3D tensor_rule_3d(int n_t, int n_s);

} // namespace sthdg
