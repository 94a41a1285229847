#include "sthdg/cases.hpp"

#include <cmath>
#include <random>

#include "sthdg/errors.hpp"

namespace sthdg {

MeshFamily parse_mesh_family(const std::string& name)
{
    if (name == "uniform")
        return MeshFamily::uniform;
    if (name == "ring")
        return MeshFamily::ring;
    throw ConfigurationError("unknown mesh family '" + name + "'");
}

const char* to_string(MeshFamily family) { return family == MeshFamily::ring ? "ring" : "uniform"; }

BetaChoice parse_beta_choice(const std::string& name)
{
    if (name == "zero")
        return BetaChoice::zero;
    if (name == "constant")
        return BetaChoice::constant;
    if (name == "rotating")
        return BetaChoice::rotating;
    throw ConfigurationError("unknown beta choice '" + name + "'");
}

bool ring_predicate(const Vec2& c) { return std::abs(c.norm() - 0.2) < 0.1; }

std::vector<int> ring_marks(const SpaceTimeMesh& mesh)
{
    std::vector<int> marks;
    for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
        const auto& b = mesh.elements[i].box;
        const double half = 0.5 * double(b.size);
        const Vec2 c = mesh.uniform_coords(double(b.lo[1]) + half, double(b.lo[2]) + half);
        if (ring_predicate(c))
            marks.push_back(static_cast<int>(i));
    }
    return marks;
}

namespace {

Vec2 rotating_field(double, const Vec2& x) { return {-4.0 * x[1], 4.0 * x[0]}; }

} // namespace

CaseDescriptor rotating_pulse(double epsilon, MeshFamily family)
{
    if (!(epsilon > 0.0))
        throw ConfigurationError("rotating_pulse needs epsilon > 0");
    CaseDescriptor c;
    c.name = "pulse";
    c.family = family;
    c.recommended_cycles = 3;
    auto& p = c.problem;
    p.name = "pulse";
    p.epsilon = epsilon;
    p.final_time = 1.0;
    p.deformation.amplitude = 0.1;
    p.beta_bar = rotating_field;
    p.forcing = [](double, const Vec2&) { return 0.0; };

    const double sigma = 0.1, c1 = -0.2, c2 = 0.1;
    p.exact = [=](double t, const Vec2& x) {
        const double ct = std::cos(4.0 * t), st = std::sin(4.0 * t);
        const double y1 = x[0] * ct + x[1] * st - c1;
        const double y2 = -x[0] * st + x[1] * ct - c2;
        const double d = 2.0 * sigma * sigma + 4.0 * epsilon * t;
        return 2.0 * sigma * sigma / d * std::exp(-(y1 * y1 + y2 * y2) / d);
    };
    p.exact_grad = [=](double t, const Vec2& x) {
        const double ct = std::cos(4.0 * t), st = std::sin(4.0 * t);
        const double r1 = x[0] * ct + x[1] * st, r2 = -x[0] * st + x[1] * ct;
        const double y1 = r1 - c1, y2 = r2 - c2;
        const double d = 2.0 * sigma * sigma + 4.0 * epsilon * t;
        const double rr = y1 * y1 + y2 * y2;
        const double u = 2.0 * sigma * sigma / d * std::exp(-rr / d);
        const double ux = u * (-2.0 / d) * (y1 * ct - y2 * st);
        const double uy = u * (-2.0 / d) * (y1 * st + y2 * ct);
        const double drr = 8.0 * (y1 * r2 - y2 * r1);
        const double ut = u * (-4.0 * epsilon / d - drr / d + 4.0 * epsilon * rr / (d * d));
        return Vec3(ut, ux, uy);
    };
    return c;
}

double PolynomialField::value(double t, const Vec2& x) const
{
    double s = 0.0;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        const auto& e = exponents[k];
        s += coefficients[k] * std::pow(t, e[0]) * std::pow(x[0], e[1]) * std::pow(x[1], e[2]);
    }
    return s;
}

Vec3 PolynomialField::gradient(double t, const Vec2& x) const
{
    auto pw = [](double v, int n) { return n <= 0 ? (n == 0 ? 1.0 : 0.0) : std::pow(v, n); };
    Vec3 g = Vec3::Zero();
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        const auto& e = exponents[k];
        const double c = coefficients[k];
        g[0] += c * e[0] * pw(t, e[0] - 1) * pw(x[0], e[1]) * pw(x[1], e[2]);
        g[1] += c * e[1] * pw(t, e[0]) * pw(x[0], e[1] - 1) * pw(x[1], e[2]);
        g[2] += c * e[2] * pw(t, e[0]) * pw(x[0], e[1]) * pw(x[1], e[2] - 1);
    }
    return g;
}

double PolynomialField::laplacian(double t, const Vec2& x) const
{
    auto pw = [](double v, int n) { return n <= 0 ? (n == 0 ? 1.0 : 0.0) : std::pow(v, n); };
    double s = 0.0;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        const auto& e = exponents[k];
        const double c = coefficients[k] * pw(t, e[0]);
        s += c * e[1] * (e[1] - 1) * pw(x[0], e[1] - 2) * pw(x[1], e[2]);
        s += c * e[2] * (e[2] - 1) * pw(x[0], e[1]) * pw(x[1], e[2] - 2);
    }
    return s;
}

PolynomialField tensor_polynomial(int p_t, int p_s, unsigned seed)
{
    PolynomialField u;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int a = 0; a <= p_t; ++a)
        for (int b = 0; b <= p_s; ++b)
            for (int c = 0; c <= p_s; ++c) {
                u.exponents.push_back({a, b, c});
                u.coefficients.push_back(coef(rng));
            }
    return u;
}

CaseDescriptor manufactured(const PolynomialField& u, double epsilon, BetaChoice beta,
                            const BoundaryPartition& partition)
{
    if (epsilon < 0.0)
        throw ConfigurationError("manufactured case needs epsilon >= 0");
    CaseDescriptor c;
    c.name = "manufactured";
    c.family = MeshFamily::uniform;
    c.recommended_cycles = 2;
    auto& p = c.problem;
    p.name = "manufactured";
    p.epsilon = epsilon;
    p.final_time = 1.0;
    p.partition = partition;
    switch (beta) {
    case BetaChoice::zero: p.beta_bar = [](double, const Vec2&) { return Vec2(0.0, 0.0); }; break;
    case BetaChoice::constant: p.beta_bar = [](double, const Vec2&) { return Vec2(0.6, -0.4); }; break;
    case BetaChoice::rotating: p.beta_bar = rotating_field; break;
    }
    const auto bb = p.beta_bar;
    p.exact = [u](double t, const Vec2& x) { return u.value(t, x); };
    p.exact_grad = [u](double t, const Vec2& x) { return u.gradient(t, x); };
    // beta_bar is divergence-free, so div(beta u) = beta . grad u.
    p.forcing = [u, bb, epsilon](double t, const Vec2& x) {
        const Vec3 g = u.gradient(t, x);
        const Vec2 b = bb(t, x);
        return g[0] + b[0] * g[1] + b[1] * g[2] - epsilon * u.laplacian(t, x);
    };
    return c;
}

CaseDescriptor manufactured(int p_t, int p_s, double epsilon, BetaChoice beta, unsigned seed)
{
    return manufactured(tensor_polynomial(p_t, p_s, seed), epsilon, beta);
}

CaseDescriptor zero_case(double epsilon)
{
    CaseDescriptor c = rotating_pulse(epsilon > 0.0 ? epsilon : 1.0, MeshFamily::uniform);
    c.name = "zero";
    c.problem.name = "zero";
    c.problem.epsilon = epsilon;
    c.problem.exact = [](double, const Vec2&) { return 0.0; };
    c.problem.exact_grad = [](double, const Vec2&) { return Vec3(0.0, 0.0, 0.0); };
    return c;
}

CaseDescriptor make_case(const std::string& name, double epsilon, int p_t, int p_s, BetaChoice beta,
                         unsigned seed)
{
    if (name == "pulse")
        return rotating_pulse(epsilon);
    if (name == "manufactured")
        return manufactured(p_t, p_s, epsilon, beta, seed);
    if (name == "zero")
        return zero_case(epsilon);
    throw ConfigurationError("unknown case '" + name + "'");
}

std::vector<std::string> case_names() { return {"pulse", "manufactured", "zero"}; }

SpaceTimeMesh case_slab(const ProblemSpec& problem, MeshFamily family, int n_cells, int n_slabs, int n,
                        const InterfaceLayout* lower)
{
    if (n_cells < 1 || n_slabs < 1)
        throw ConfigurationError("cell and slab counts must be positive");
    const int slabs = n_slabs;
    if (n < 0 || n >= slabs)
        throw ConfigurationError("slab index out of range");
    UniformGrid grid = problem.domain;
    grid.nx = grid.ny = n_cells;
    const double dt = problem.final_time / slabs;
    const double t1 = n + 1 == slabs ? problem.final_time : (n + 1) * dt;
    MeshOptions opt;
    opt.partition = problem.partition;
    opt.lower = lower;
    auto mesh = build_slab(grid, n * dt, t1, problem.deformation, problem.final_time, opt);
    if (family == MeshFamily::ring)
        mesh = refine_elements(mesh, ring_marks(mesh), opt);
    return mesh;
}

MeshSequence case_sequence(const ProblemSpec& problem, MeshFamily family, int n_cells, int n_slabs)
{
    MeshSequence seq;
    seq.count = n_slabs;
    seq.build = [problem, family, n_cells, n_slabs](int n, const InterfaceLayout* lower) {
        return case_slab(problem, family, n_cells, n_slabs, n, lower);
    };
    return seq;
}

MeshSequence case_sequence(const ProblemSpec& problem, MeshFamily family, int n_cells)
{
    return case_sequence(problem, family, n_cells, n_cells);
}

} // namespace sthdg
