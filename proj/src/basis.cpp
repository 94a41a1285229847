#include "sthdg/basis.hpp"

#include "sthdg/errors.hpp"

namespace sthdg {

void legendre(int n, double x, double* values, double* derivatives)
{
    values[0] = 1.0;
    if (derivatives)
        derivatives[0] = 0.0;
    if (n == 0)
        return;
    values[1] = x;
    if (derivatives)
        derivatives[1] = 1.0;
    for (int k = 2; k <= n; ++k) {
        values[k] = ((2.0 * k - 1.0) * x * values[k - 1] - (k - 1.0) * values[k - 2]) / k;
        // P_k' = P_{k-2}' + (2k-1) P_{k-1}
        if (derivatives)
            derivatives[k] = derivatives[k - 2] + (2.0 * k - 1.0) * values[k - 1];
    }
}

TensorBasis::TensorBasis(int p_t, int p_s)
    : p_t_(p_t), p_s_(p_s), size_((p_t + 1) * (p_s + 1) * (p_s + 1))
{
    if (p_t < 0 || p_s < 0)
        throw DomainError("TensorBasis: negative degree");
}

void TensorBasis::eval(const Vec3& xi, Vector& values,
                       Eigen::Matrix<double, 3, Eigen::Dynamic>& grads) const
{
    double pt[16], dpt[16], px[16], dpx[16], py[16], dpy[16];
    legendre(p_t_, xi[0], pt, dpt);
    legendre(p_s_, xi[1], px, dpx);
    legendre(p_s_, xi[2], py, dpy);
    values.resize(size_);
    grads.resize(3, size_);
    int i = 0;
    for (int a = 0; a <= p_t_; ++a)
        for (int b = 0; b <= p_s_; ++b)
            for (int c = 0; c <= p_s_; ++c, ++i) {
                values[i] = pt[a] * px[b] * py[c];
                grads(0, i) = dpt[a] * px[b] * py[c];
                grads(1, i) = pt[a] * dpx[b] * py[c];
                grads(2, i) = pt[a] * px[b] * dpy[c];
            }
}

void TensorBasis::eval(const Vec3& xi, Vector& values) const
{
    double pt[16], px[16], py[16];
    legendre(p_t_, xi[0], pt, nullptr);
    legendre(p_s_, xi[1], px, nullptr);
    legendre(p_s_, xi[2], py, nullptr);
    values.resize(size_);
    int i = 0;
    for (int a = 0; a <= p_t_; ++a)
        for (int b = 0; b <= p_s_; ++b)
            for (int c = 0; c <= p_s_; ++c, ++i)
                values[i] = pt[a] * px[b] * py[c];
}

std::array<int, 3> TensorBasis::degrees(int i) const
{
    const int n = p_s_ + 1;
    return {i / (n * n), (i / n) % n, i % n};
}

double TensorBasis::ref_mass(int i) const
{
    const auto d = degrees(i);
    return 8.0 / ((2.0 * d[0] + 1.0) * (2.0 * d[1] + 1.0) * (2.0 * d[2] + 1.0));
}

FacetBasis::FacetBasis(int q1, int q2) : q1_(q1), q2_(q2)
{
    if (q1 < 0 || q2 < 0)
        throw DomainError("FacetBasis: negative degree");
}

void FacetBasis::eval(const Vec2& s, Vector& values) const
{
    double p1[16], p2[16];
    legendre(q1_, s[0], p1, nullptr);
    legendre(q2_, s[1], p2, nullptr);
    values.resize(size());
    int i = 0;
    for (int a = 0; a <= q1_; ++a)
        for (int b = 0; b <= q2_; ++b, ++i)
            values[i] = p1[a] * p2[b];
}

void FacetBasis::eval(const Vec2& s, Vector& values, Eigen::Matrix<double, 2, Eigen::Dynamic>& grads) const
{
    double p1[16], d1[16], p2[16], d2[16];
    legendre(q1_, s[0], p1, d1);
    legendre(q2_, s[1], p2, d2);
    values.resize(size());
    grads.resize(2, size());
    int i = 0;
    for (int a = 0; a <= q1_; ++a)
        for (int b = 0; b <= q2_; ++b, ++i) {
            values[i] = p1[a] * p2[b];
            grads(0, i) = d1[a] * p2[b];
            grads(1, i) = p1[a] * d2[b];
        }
}

double FacetBasis::ref_mass(int i) const
{
    const int a = i / (q2_ + 1), b = i % (q2_ + 1);
    return 4.0 / ((2.0 * a + 1.0) * (2.0 * b + 1.0));
}

} // namespace sthdg
