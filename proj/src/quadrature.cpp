#include "sthdg/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "sthdg/errors.hpp"

namespace sthdg {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre_pair(int n, double x, double& pn, double& dpn)
{
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        pn = 1.0;
        dpn = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    pn = p1;
    dpn = n * (x * p1 - p0) / (x * x - 1.0);
}

} // namespace

QuadratureRule gauss_rule(int n)
{
    if (n < 1)
        throw DomainError("gauss_rule: need at least one point");

    QuadratureRule rule;
    rule.points.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    if (n == 1) {
        rule.weights[0] = 2.0;
        return rule;
    }

    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pn = 0.0, dpn = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre_pair(n, x, pn, dpn);
            const double dx = pn / dpn;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        legendre_pair(n, x, pn, dpn);
        const double w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        rule.points[i] = -x;
        rule.points[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.points[n / 2] = 0.0;
    return rule;
}

QuadratureRule2D tensor_rule_2d(int n1, int n2)
{
    const auto r1 = gauss_rule(n1);
    const auto r2 = gauss_rule(n2);
    QuadratureRule2D rule;
    rule.points.reserve(r1.size() * r2.size());
    rule.weights.reserve(r1.size() * r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i)
        for (std::size_t j = 0; j < r2.size(); ++j) {
            rule.points.emplace_back(r1.points[i], r2.points[j]);
            rule.weights.push_back(r1.weights[i] * r2.weights[j]);
        }
    return rule;
}

QuadratureRule3D tensor_rule_3d(int n_t, int n_s)
{
    const auto rt = gauss_rule(n_t);
    const auto rs = gauss_rule(n_s);
    QuadratureRule3D rule;
    rule.points.reserve(rt.size() * rs.size() * rs.size());
    rule.weights.reserve(rt.size() * rs.size() * rs.size());
    for (std::size_t a = 0; a < rt.size(); ++a)
        for (std::size_t b = 0; b < rs.size(); ++b)
            for (std::size_t c = 0; c < rs.size(); ++c) {
                rule.points.emplace_back(rt.points[a], rs.points[b], rs.points[c]);
                rule.weights.push_back(rt.weights[a] * rs.weights[b] * rs.weights[c]);
            }
    return rule;
}

} // namespace sthdg
