#include "sthdg/problem.hpp"

#include <cmath>
#include <random>

#include "sthdg/errors.hpp"

namespace sthdg {

Vec3 ProblemSpec::beta(double t, const Vec2& x) const
{
    const Vec2 b = beta_bar ? beta_bar(t, x) : Vec2::Zero();
    return {1.0, b[0], b[1]};
}

double neumann_from_exact(const ProblemSpec& problem, const BoundaryPoint& p)
{
    const double u = problem.exact(p.t, p.x);
    const Vec3 g = problem.exact_grad(p.t, p.x);
    const double bn = problem.beta(p.t, p.x).dot(p.normal);
    return -zeta_minus(bn) * u * bn + problem.epsilon * (g[1] * p.normal[1] + g[2] * p.normal[2]);
}

double ProblemSpec::neumann_data(const BoundaryPoint& p) const
{
    if (partition.is_dirichlet(p.side))
        throw ContractError("neumann_data called on the Dirichlet boundary");
    if (neumann)
        return neumann(p);
    if (has_exact())
        return neumann_from_exact(*this, p);
    throw ConfigurationError("problem '" + name + "' has no Neumann data");
}

double sample_divergence(const ProblemSpec& problem, int samples, unsigned seed, double step)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(problem.domain.lo[0], problem.domain.hi[0]);
    std::uniform_real_distribution<double> uy(problem.domain.lo[1], problem.domain.hi[1]);
    std::uniform_real_distribution<double> ut(0.0, problem.final_time);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = ut(rng);
        const Vec2 x(ux(rng), uy(rng));
        const Vec3 bxp = problem.beta(t, x + Vec2(step, 0.0)), bxm = problem.beta(t, x - Vec2(step, 0.0));
        const Vec3 byp = problem.beta(t, x + Vec2(0.0, step)), bym = problem.beta(t, x - Vec2(0.0, step));
        const double div = (bxp[1] - bxm[1] + byp[2] - bym[2]) / (2.0 * step);
        worst = std::max(worst, std::abs(div));
    }
    return worst;
}

double sample_pde_residual(const ProblemSpec& problem, int samples, unsigned seed, double step)
{
    if (!problem.exact)
        throw ConfigurationError("sample_pde_residual needs an exact solution");
    std::mt19937_64 rng(seed);
    const double margin = 2.0 * step;
    std::uniform_real_distribution<double> ux(problem.domain.lo[0] + margin, problem.domain.hi[0] - margin);
    std::uniform_real_distribution<double> uy(problem.domain.lo[1] + margin, problem.domain.hi[1] - margin);
    std::uniform_real_distribution<double> ut(margin, problem.final_time - margin);
    const auto& u = problem.exact;
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = ut(rng);
        const Vec2 x(ux(rng), uy(rng));
        const Vec2 ex(step, 0.0), ey(0.0, step);
        const double ut_ = (u(t + step, x) - u(t - step, x)) / (2.0 * step);
        auto flux1 = [&](const Vec2& y) { return problem.beta(t, y)[1] * u(t, y); };
        auto flux2 = [&](const Vec2& y) { return problem.beta(t, y)[2] * u(t, y); };
        const double div = (flux1(x + ex) - flux1(x - ex) + flux2(x + ey) - flux2(x - ey)) / (2.0 * step);
        const double lap =
            (u(t, x + ex) + u(t, x - ex) + u(t, x + ey) + u(t, x - ey) - 4.0 * u(t, x)) / (step * step);
        const double r = ut_ + div - problem.epsilon * lap - problem.f(t, x);
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

} // namespace sthdg
