#pragma once

#include <array>
#include <vector>

#include "sthdg/types.hpp"

namespace sthdg {

/// Legendre polynomials P_0..P_n and derivatives at x.
void legendre(int n, double x, double* values, double* derivatives);

/// Modal tensor-product Legendre basis of Q_{(p_t,p_s)} on (-1,1)^3.
///
/// Mode (it, ix, iy) is P_it(t) P_ix(x1) P_iy(x2).
class TensorBasis {
public:
    TensorBasis(int p_t, int p_s);

    int p_t() const { return p_t_; }
    int p_s() const { return p_s_; }
    int size() const { return size_; }

    int index(int it, int ix, int iy) const { return (it * (p_s_ + 1) + ix) * (p_s_ + 1) + iy; }

    /// Values and reference gradients (d/dt, d/dx1, d/dx2) of every mode.
    void eval(const Vec3& xi, Vector& values, Eigen::Matrix<double, 3, Eigen::Dynamic>& grads) const;
    void eval(const Vec3& xi, Vector& values) const;

    /// Diagonal entry of the reference mass matrix.
    double ref_mass(int i) const;

    /// Per-mode degrees (it, ix, iy).
    std::array<int, 3> degrees(int i) const;

private:
    int p_t_, p_s_, size_;
};

/// Tensor Legendre basis of degrees (q1, q2) on the facet square (-1,1)^2.
class FacetBasis {
public:
    FacetBasis(int q1, int q2);

    int q1() const { return q1_; }
    int q2() const { return q2_; }
    int size() const { return (q1_ + 1) * (q2_ + 1); }
    int index(int i1, int i2) const { return i1 * (q2_ + 1) + i2; }

    void eval(const Vec2& s, Vector& values) const;
    void eval(const Vec2& s, Vector& values, Eigen::Matrix<double, 2, Eigen::Dynamic>& grads) const;

    double ref_mass(int i) const;

private:
    int q1_, q2_;
};

} // namespace sthdg
