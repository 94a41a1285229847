#include "sthdg/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "sthdg/basis.hpp"
#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/quadrature.hpp"

namespace sthdg {

namespace {

constexpr double kE = std::numbers::e;

// Largest eigenvalue of A x = lambda M x.
double gen_max(const Matrix& a, const Matrix& m, long element)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw GeometryError("singular mass matrix in element " + std::to_string(element), element);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

double facet_dt(const SpaceTimeMesh& mesh, const Facet& f)
{
    return mesh.lattice_time(f.box.lo[0] + f.box.size) - mesh.lattice_time(f.box.lo[0]);
}

int slot_of(const Facet& f, int element, int face)
{
    return f.owner[0] == element && f.face[0] == face ? 0 : 1;
}

// Volume and face quadratic forms of one element.
struct ElementForms {
    Matrix mass, dt, dx, q_face, boundary;
};

ElementForms element_forms(const SpaceTimeMesh& mesh, int e, const TensorBasis& basis, int nq)
{
    const auto& el = mesh.elements[e];
    const int n = basis.size();
    ElementForms f;
    f.mass = f.dt = f.dx = f.q_face = f.boundary = Matrix::Zero(n, n);
    Vector v;
    Eigen::Matrix<double, 3, Eigen::Dynamic> rg;
    const auto vr = tensor_rule_3d(nq, nq);
    for (std::size_t q = 0; q < vr.size(); ++q) {
        const auto g = geometry(el, vr.points[q], e);
        basis.eval(vr.points[q], v, rg);
        const Matrix pg = g.inv.transpose() * rg;
        const double w = vr.weights[q] * g.det;
        f.mass.noalias() += w * v * v.transpose();
        f.dt.noalias() += w * pg.row(0).transpose() * pg.row(0);
        f.dx.noalias() += w * pg.bottomRows(2).transpose() * pg.bottomRows(2);
    }
    const auto fr = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    for (int face = 0; face < 6; ++face)
        for (int id : el.face_facets[face]) {
            const auto& facet = mesh.facets[id];
            facet_points(mesh, facet, slot_of(facet, e, face), fr, fp);
            for (const auto& p : fp) {
                basis.eval(p.xi, v);
                const Matrix vv = p.weight * v * v.transpose();
                f.boundary += vv;
                if (facet.kind == FacetKind::Q)
                    f.q_face += vv;
            }
        }
    return f;
}

// Coefficients of Pi_h(phi v) = P c on one element.
Matrix weighted_projector(const SpaceTimeMesh& mesh, int e, const TensorBasis& basis, const WeightFunction& phi,
                          int nq, const Matrix& mass)
{
    const auto& el = mesh.elements[e];
    const auto vr = tensor_rule_3d(nq, nq);
    Matrix mphi = Matrix::Zero(basis.size(), basis.size());
    Vector v;
    for (std::size_t q = 0; q < vr.size(); ++q) {
        const auto g = geometry(el, vr.points[q], e);
        const Vec3 x = map_point(el, vr.points[q]);
        basis.eval(vr.points[q], v);
        mphi.noalias() += vr.weights[q] * g.det * phi(x[0]) * v * v.transpose();
    }
    return mass.ldlt().solve(mphi);
}

} // namespace

double WeightFunction::operator()(double t) const
{
    if (final_time >= 1.0)
        return kE * final_time * std::exp(-t / final_time) + chi;
    return kE * std::exp(-t) + chi;
}

double WeightFunction::derivative(double t) const
{
    if (final_time >= 1.0)
        return -kE * std::exp(-t / final_time);
    return -kE * std::exp(-t);
}

double weight_phi(double t, double final_time, double chi)
{
    if (!(final_time > 0.0))
        throw DomainError("weight_phi: final time must be positive");
    return WeightFunction{final_time, chi}(t);
}

double chi_threshold(double final_time)
{
    return (kE - std::numbers::sqrt2) * final_time / (std::numbers::sqrt2 - 1.0);
}

double alpha_threshold(double c_star) { return 1.0 + 4.0 * c_star * c_star; }

double estimate_trace_constant(const SpaceTimeMesh& mesh, int p_t, int p_s)
{
    const TensorBasis basis(p_t, p_s);
    const int nq = assembly_points(p_t, p_s);
    double c2 = 0.0;
    for (int e = 0; e < static_cast<int>(mesh.elements.size()); ++e) {
        const auto f = element_forms(mesh, e, basis, nq);
        c2 = std::max(c2, mesh.elements[e].h * gen_max(f.q_face, f.mass, e));
    }
    return std::sqrt(c2);
}

ConstantEstimates estimate_constants(const SpaceTimeMesh& mesh, int p_t, int p_s, double final_time)
{
    ConstantEstimates c;
    c.c_star = estimate_trace_constant(mesh, p_t, p_s);
    c.chi_threshold = chi_threshold(final_time);
    c.alpha_threshold = alpha_threshold(c.c_star);
    return c;
}

Vector weighted_projection(const SpaceTimeMesh& mesh, const TraceLayout& layout, const WeightFunction& phi,
                           const Vector& w)
{
    const TensorBasis basis(layout.p_t, layout.p_s);
    const int n = basis.size();
    const int ne = static_cast<int>(mesh.elements.size());
    const int nq = assembly_points(layout.p_t, layout.p_s);
    if (w.size() != ne * n + layout.total)
        throw ContractError("weighted_projection: vector has the wrong length");
    Vector y(w.size());
    for (int e = 0; e < ne; ++e) {
        const Matrix m = element_mass(mesh, e, basis, nq);
        y.segment(e * n, n) = weighted_projector(mesh, e, basis, phi, nq, m) * w.segment(e * n, n);
    }
    const auto fr = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    Vector v;
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const int off = layout.offset[i];
        if (off < 0)
            continue;
        const auto q = facet_degrees(mesh.facets[i], layout.p_t, layout.p_s);
        const FacetBasis fb(q[0], q[1]);
        Matrix m = Matrix::Zero(fb.size(), fb.size()), mphi = m;
        facet_points(mesh, mesh.facets[i], 0, fr, fp);
        for (const auto& p : fp) {
            fb.eval(p.s, v);
            m.noalias() += p.weight * v * v.transpose();
            mphi.noalias() += p.weight * phi(p.x[0]) * v * v.transpose();
        }
        y.segment(n * ne + off, fb.size()) = m.ldlt().solve(mphi * w.segment(n * ne + off, fb.size()));
    }
    return y;
}

CoercivityReport check_weighted_coercivity(const SpaceTimeMesh& mesh, const ProblemSpec& problem, int p_t,
                                           int p_s, double alpha, double chi, int samples, unsigned seed)
{
    const double T = problem.final_time;
    CoercivityReport r;
    r.alpha = alpha;
    r.chi = chi;
    r.constants = estimate_constants(mesh, p_t, p_s, T);
    if (!(chi > r.constants.chi_threshold))
        throw ConfigurationError("chi = " + std::to_string(chi) + " is not above the threshold " +
                                 std::to_string(r.constants.chi_threshold));
    if (!(alpha > 1.0))
        throw ConfigurationError("penalty alpha = " + std::to_string(alpha) + " must exceed 1");
    if (samples < 1)
        throw ConfigurationError("coercivity check needs at least one sample");
    r.alpha_below_threshold = alpha <= r.constants.alpha_threshold;

    HdgParams params;
    params.p_t = p_t;
    params.p_s = p_s;
    params.alpha = alpha;
    const auto g = assemble_global(mesh, problem, params);
    const auto gram = assemble_norm_gram(mesh, g.layout, problem, assembly_points(p_t, p_s));
    const auto gv = gram.v();
    const WeightFunction phi{T, chi};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const int dim = g.num_u + g.num_lambda;
    r.worst_ratio = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Vector w(dim);
        for (int i = 0; i < dim; ++i)
            w[i] = normal(rng);
        const Vector y = weighted_projection(mesh, g.layout, phi, w);
        const double lhs = y.dot(g.A.multiply(w));
        const double nv = w.dot(gv * w);
        const double ratio = nv > 0.0 ? lhs / nv : 1.0;
        r.ratios.push_back(ratio);
        r.worst_ratio = std::min(r.worst_ratio, ratio);
    }
    r.pass = r.worst_ratio >= 0.25;
    return r;
}

InverseConstants inverse_constants(const SpaceTimeMesh& mesh, int p_t, int p_s)
{
    const TensorBasis basis(p_t, p_s);
    const int nq = assembly_points(p_t, p_s);
    InverseConstants c;
    for (int e = 0; e < static_cast<int>(mesh.elements.size()); ++e) {
        const auto& el = mesh.elements[e];
        const auto f = element_forms(mesh, e, basis, nq);
        c.time_derivative = std::max(c.time_derivative, std::sqrt(gen_max(f.dt, f.mass, e)) / (1.0 / el.dt + 1.0 / el.h));
        c.spatial_gradient = std::max(c.spatial_gradient, el.h * std::sqrt(gen_max(f.dx, f.mass, e)));
        c.trace_q = std::max(c.trace_q, std::sqrt(el.h * gen_max(f.q_face, f.mass, e)));
        c.trace_boundary = std::max(c.trace_boundary, std::sqrt(gen_max(f.boundary, f.mass, e)) /
                                                           (1.0 / std::sqrt(el.dt) + 1.0 / std::sqrt(el.h)));
    }
    const auto fr = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    Vector v;
    Eigen::Matrix<double, 2, Eigen::Dynamic> sg;
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& facet = mesh.facets[i];
        if (facet.kind != FacetKind::Q)
            continue;
        const auto q = facet_degrees(facet, p_t, p_s);
        const FacetBasis fb(q[0], q[1]);
        const double dtf = facet_dt(mesh, facet);
        Matrix m = Matrix::Zero(fb.size(), fb.size()), k = m;
        facet_points(mesh, facet, 0, fr, fp);
        for (const auto& p : fp) {
            fb.eval(p.s, v, sg);
            const Vector d = (2.0 / dtf) * sg.row(0).transpose();
            m.noalias() += p.weight * v * v.transpose();
            k.noalias() += p.weight * d * d.transpose();
        }
        for (int slot = 0; slot < 2; ++slot) {
            const int o = facet.owner[slot];
            if (o < 0)
                continue;
            const auto& el = mesh.elements[o];
            c.facet_time_derivative = std::max(c.facet_time_derivative,
                                               std::sqrt(gen_max(k, m, o)) / (1.0 / el.dt + 1.0 / el.h));
        }
    }
    return c;
}

const char* const weighted_names[5] = {"weighted_volume", "weighted_gradient", "weighted_q_gradient",
                                       "weighted_q_trace", "weighted_r_trace"};

namespace {

// Sum of a_m sin(k_m . z + theta_m) in element-normalized coordinates z.
struct TrigField {
    std::vector<Vec3> k;
    std::vector<double> a, theta;

    static TrigField random(std::mt19937_64& rng, int modes)
    {
        std::uniform_real_distribution<double> freq(-std::numbers::pi, std::numbers::pi);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        std::normal_distribution<double> amp;
        TrigField f;
        for (int m = 0; m < modes; ++m) {
            f.k.emplace_back(freq(rng), freq(rng), freq(rng));
            f.a.push_back(amp(rng));
            f.theta.push_back(phase(rng));
        }
        return f;
    }

    // Value and physical gradient at z with scales (dt, h, h).
    double eval(const Vec3& z, const Vec3& scale, Vec3& grad) const
    {
        double v = 0.0;
        grad.setZero();
        for (std::size_t m = 0; m < a.size(); ++m) {
            const double arg = k[m].dot(z) + theta[m];
            v += a[m] * std::sin(arg);
            grad += a[m] * std::cos(arg) * k[m].cwiseQuotient(scale);
        }
        return v;
    }
};

} // namespace

ProjectionConstants projection_constants(const SpaceTimeMesh& mesh, int p_t, int p_s, const WeightFunction& phi,
                                         int samples, unsigned seed)
{
    const TensorBasis basis(p_t, p_s);
    const int n = basis.size();
    const int nq = error_points(p_t, p_s) + 1;
    const auto vr = tensor_rule_3d(nq, nq);
    const auto fr = tensor_rule_2d(nq, nq);
    std::mt19937_64 rng(seed);
    std::vector<TrigField> fields;
    for (int s = 0; s < samples; ++s)
        fields.push_back(TrigField::random(rng, 3));

    ProjectionConstants c;
    std::vector<FacetPoint> fp;
    Vector v, phv;
    Eigen::Matrix<double, 3, Eigen::Dynamic> rg;
    for (int e = 0; e < static_cast<int>(mesh.elements.size()); ++e) {
        const auto& el = mesh.elements[e];
        const Vec3 centre = map_point(el, Vec3::Zero());
        const Vec3 scale(el.dt, el.h, el.h);
        auto zof = [&](const Vec3& x) { return Vec3((x - centre).cwiseQuotient(scale)); };

        // Volume tabulation.
        std::vector<Vector> vals(vr.size());
        std::vector<Matrix> grads(vr.size());
        std::vector<double> wts(vr.size()), ts(vr.size());
        std::vector<Vec3> zs(vr.size());
        Matrix mass = Matrix::Zero(n, n);
        for (std::size_t q = 0; q < vr.size(); ++q) {
            const auto g = geometry(el, vr.points[q], e);
            basis.eval(vr.points[q], v, rg);
            vals[q] = v;
            grads[q] = g.inv.transpose() * rg;
            wts[q] = vr.weights[q] * g.det;
            const Vec3 x = map_point(el, vr.points[q]);
            ts[q] = x[0];
            zs[q] = zof(x);
            mass.noalias() += wts[q] * v * v.transpose();
        }
        const auto ldlt = mass.ldlt();

        // Smooth-field projection ratios.
        for (const auto& field : fields) {
            Vector b = Vector::Zero(n);
            std::vector<double> uq(vr.size());
            std::vector<Vec3> gq(vr.size());
            for (std::size_t q = 0; q < vr.size(); ++q) {
                uq[q] = field.eval(zs[q], scale, gq[q]);
                b += wts[q] * uq[q] * vals[q];
            }
            const Vector pc = ldlt.solve(b);
            double gx = 0, gt = 0, ex = 0, et = 0;
            for (std::size_t q = 0; q < vr.size(); ++q) {
                const Vec3 pg = grads[q] * pc;
                const Vec3 d = gq[q] - pg;
                gx += wts[q] * gq[q].tail<2>().squaredNorm();
                gt += wts[q] * gq[q][0] * gq[q][0];
                ex += wts[q] * d.tail<2>().squaredNorm();
                et += wts[q] * d[0] * d[0];
            }
            if (gx > 1e-300) {
                c.spatial_grad = std::max(c.spatial_grad, std::sqrt(ex / gx));
                c.time_derivative = std::max(c.time_derivative, std::sqrt(et) / (std::sqrt(gt) + std::sqrt(gx)));
            }
            // Pi u - Pi^F u on the Q faces of this element.
            double dq = 0.0;
            for (int face = 2; face < 6; ++face)
                for (int id : el.face_facets[face]) {
                    const auto& facet = mesh.facets[id];
                    const auto qd = facet_degrees(facet, p_t, p_s);
                    const FacetBasis fb(qd[0], qd[1]);
                    facet_points(mesh, facet, slot_of(facet, e, face), fr, fp);
                    Matrix mf = Matrix::Zero(fb.size(), fb.size());
                    Vector bf = Vector::Zero(fb.size());
                    for (const auto& p : fp) {
                        fb.eval(p.s, phv);
                        Vec3 gdummy;
                        mf.noalias() += p.weight * phv * phv.transpose();
                        bf += p.weight * field.eval(zof(p.x), scale, gdummy) * phv;
                    }
                    const Vector fc = mf.ldlt().solve(bf);
                    for (const auto& p : fp) {
                        fb.eval(p.s, phv);
                        basis.eval(p.xi, v);
                        const double d = v.dot(pc) - phv.dot(fc);
                        dq += p.weight * d * d;
                    }
                }
            if (gx > 1e-300)
                c.elem_facet_q = std::max(c.elem_facet_q, std::sqrt(dq / (el.h * gx)));
        }

        // (I - Pi)(phi w): e = (phi psi^T - psi^T P) c.
        Matrix mphi = Matrix::Zero(n, n);
        for (std::size_t q = 0; q < vr.size(); ++q)
            mphi.noalias() += wts[q] * phi(ts[q]) * vals[q] * vals[q].transpose();
        const Matrix P = ldlt.solve(mphi);
        Matrix g_vol = Matrix::Zero(n, n), g_grad = g_vol, g_qv = g_vol, g_qg = g_vol, g_r = g_vol;
        for (std::size_t q = 0; q < vr.size(); ++q) {
            const double f = phi(ts[q]);
            const Eigen::RowVectorXd row = f * vals[q].transpose() - vals[q].transpose() * P;
            g_vol.noalias() += wts[q] * row.transpose() * row;
            const Matrix gr = f * grads[q].bottomRows(2) - grads[q].bottomRows(2) * P;
            g_grad.noalias() += wts[q] * gr.transpose() * gr;
        }
        for (int face = 0; face < 6; ++face)
            for (int id : el.face_facets[face]) {
                const auto& facet = mesh.facets[id];
                facet_points(mesh, facet, slot_of(facet, e, face), fr, fp);
                for (const auto& p : fp) {
                    const auto g = geometry(el, p.xi, e);
                    basis.eval(p.xi, v, rg);
                    const double f = phi(p.x[0]);
                    const Eigen::RowVectorXd row = f * v.transpose() - v.transpose() * P;
                    if (facet.kind == FacetKind::R) {
                        g_r.noalias() += p.weight * row.transpose() * row;
                    } else {
                        g_qv.noalias() += p.weight * row.transpose() * row;
                        const Matrix pg = (g.inv.transpose() * rg).bottomRows(2);
                        const Matrix gr = f * pg - pg * P;
                        g_qg.noalias() += p.weight * gr.transpose() * gr;
                    }
                }
            }
        const double dt = el.dt, h = el.h;
        const double w1 = std::sqrt(gen_max(g_vol, mass, e)) / dt;
        const double w2 = std::sqrt(gen_max(g_grad, mass, e)) * h / dt;
        const double w5 = std::sqrt(gen_max(g_qg, mass, e)) * std::pow(h, 1.5) / dt;
        const double w3 = std::sqrt(gen_max(g_qv, mass, e)) * std::sqrt(h) / dt;
        const double w4 = std::sqrt(gen_max(g_r, mass, e)) / std::sqrt(dt);
        const double w[5] = {w1, w2, w5, w3, w4};
        for (int k = 0; k < 5; ++k)
            c.weighted[k] = std::max(c.weighted[k], w[k]);
    }
    return c;
}

ConstantDrift make_drift(const std::string& name, const std::vector<double>& values, double tolerance)
{
    ConstantDrift d;
    d.name = name;
    d.values = values;
    if (values.empty())
        throw ContractError("make_drift: no values");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    d.drift = *lo > 0.0 ? (*hi - *lo) / *lo : std::numeric_limits<double>::infinity();
    d.pass = std::isfinite(d.drift) && d.drift < tolerance;
    return d;
}

namespace {

DriftReport finish(std::vector<ConstantDrift> constants)
{
    DriftReport r;
    r.constants = std::move(constants);
    r.pass = std::all_of(r.constants.begin(), r.constants.end(), [](const auto& c) { return c.pass; });
    return r;
}

} // namespace

DriftReport check_inverse_inequalities(const std::vector<const SpaceTimeMesh*>& levels, int p_t, int p_s,
                                       double tolerance)
{
    if (levels.size() < 2)
        throw ConfigurationError("inverse-inequality check needs at least two levels");
    std::vector<double> c1, c2, c3, c4, c5;
    for (const auto* m : levels) {
        const auto c = inverse_constants(*m, p_t, p_s);
        c1.push_back(c.time_derivative);
        c2.push_back(c.spatial_gradient);
        c3.push_back(c.trace_q);
        c4.push_back(c.trace_boundary);
        c5.push_back(c.facet_time_derivative);
    }
    return finish({make_drift("inverse_time_derivative", c1, tolerance), make_drift("inverse_spatial_gradient", c2, tolerance),
                   make_drift("trace_q", c3, tolerance), make_drift("trace_boundary", c4, tolerance),
                   make_drift("inverse_facet_time_derivative", c5, tolerance)});
}

DriftReport check_projection_bounds(const std::vector<const SpaceTimeMesh*>& levels, int p_t, int p_s,
                                    const WeightFunction& phi, int samples, unsigned seed, double tolerance)
{
    if (levels.size() < 2)
        throw ConfigurationError("projection check needs at least two levels");
    std::vector<std::vector<double>> v(8);
    for (const auto* m : levels) {
        const auto c = projection_constants(*m, p_t, p_s, phi, samples, seed);
        v[0].push_back(c.spatial_grad);
        v[1].push_back(c.time_derivative);
        v[2].push_back(c.elem_facet_q);
        for (int k = 0; k < 5; ++k)
            v[3 + k].push_back(c.weighted[k]);
    }
    std::vector<ConstantDrift> out = {make_drift("projection_gradient", v[0], tolerance),
                                      make_drift("projection_time_derivative", v[1], tolerance),
                                      make_drift("projection_element_facet_q", v[2], tolerance)};
    for (int k = 0; k < 5; ++k)
        out.push_back(make_drift(weighted_names[k], v[3 + k], tolerance));
    return finish(std::move(out));
}

ReproductionReport check_reproduction(const ProblemSpec& problem, const MeshSequence& meshes,
                                      const HdgParams& params, double tolerance)
{
    if (!problem.has_exact())
        throw ConfigurationError("reproduction check needs an exact solution");
    const auto result = march(problem, meshes, params);
    const auto report = error_report(result.solution, problem);
    ReproductionReport r;
    r.error_ss = report.error_ss;
    r.norm_ss = norm_ss(meshes_of(result.solution), problem, exact_pair(problem), params.p_t, params.p_s);
    r.relative = r.norm_ss > 0.0 ? r.error_ss / r.norm_ss : r.error_ss;
    r.pass = r.relative < tolerance;
    return r;
}

namespace {

double slab_norm(const SlabSolution& s)
{
    double n2 = s.lambda.squaredNorm();
    for (const auto& u : s.u)
        n2 += u.squaredNorm();
    return std::sqrt(n2);
}

double slab_diff(const SlabSolution& a, const SlabSolution& b)
{
    if (a.u.size() != b.u.size() || a.lambda.size() != b.lambda.size())
        throw ContractError("causality check: slab layouts differ");
    double d2 = (a.lambda - b.lambda).squaredNorm();
    for (std::size_t e = 0; e < a.u.size(); ++e)
        d2 += (a.u[e] - b.u[e]).squaredNorm();
    return std::sqrt(d2);
}

} // namespace

CausalityReport check_causality(const ProblemSpec& problem, const MeshSequence& meshes, const HdgParams& params,
                                int perturbed, double tolerance)
{
    if (perturbed < 1 || perturbed >= meshes.count)
        throw ConfigurationError("perturbed slab must lie in [1, number of slabs)");
    MeshSequence head = meshes;
    head.count = perturbed + 1;
    const auto base = march(problem, head, params);
    const double t0 = base.solution.slabs[perturbed].mesh->t_begin();
    const double t1 = base.solution.slabs[perturbed].mesh->t_end();

    ProblemSpec changed = problem;
    const auto f = problem.forcing;
    changed.forcing = [f, t0, t1](double t, const Vec2& x) {
        const double bump = t > t0 && t < t1 ? 1.0 + x[0] * x[1] : 0.0;
        return f(t, x) + bump;
    };
    const auto other = march(changed, head, params);

    CausalityReport r;
    r.perturbed_slab = perturbed;
    for (int k = 0; k < perturbed; ++k) {
        const double n = slab_norm(base.solution.slabs[k]);
        const double d = slab_diff(base.solution.slabs[k], other.solution.slabs[k]);
        r.max_relative_change = std::max(r.max_relative_change, n > 0.0 ? d / n : d);
    }
    const auto& pa = base.solution.slabs[perturbed];
    const auto& pb = other.solution.slabs[perturbed];
    const double n = slab_norm(pa);
    r.perturbed_change = slab_diff(pa, pb) / std::max(n, 1e-300);
    // The perturbation must be visible where it was applied.
    r.pass = r.max_relative_change < tolerance && r.perturbed_change > 1e-8;
    return r;
}

Vector time_derivative_test_function(const SpaceTimeMesh& mesh, const TraceLayout& layout, double epsilon,
                                     const Vector& w)
{
    const TensorBasis basis(layout.p_t, layout.p_s);
    const int n = basis.size();
    const int ne = static_cast<int>(mesh.elements.size());
    const int nq = assembly_points(layout.p_t, layout.p_s);
    if (w.size() != ne * n + layout.total)
        throw ContractError("time_derivative_test_function: vector has the wrong length");
    Vector y = Vector::Zero(w.size());
    Vector v;
    Eigen::Matrix<double, 3, Eigen::Dynamic> rg;
    for (int e = 0; e < ne; ++e) {
        const auto& el = mesh.elements[e];
        const double tau = tau_eps(el, epsilon).value;
        const Vector c = w.segment(e * n, n);
        y.segment(e * n, n) = project_volume(
            mesh, e, basis,
            [&](const Vec3& xi, const Vec3&) {
                const auto g = geometry(el, xi, e);
                basis.eval(xi, v, rg);
                return tau * (g.inv.transpose() * rg).row(0).dot(c);
            },
            nq);
    }
    const auto fr = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    Vector phv;
    Eigen::Matrix<double, 2, Eigen::Dynamic> sg;
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& facet = mesh.facets[i];
        const int off = layout.offset[i];
        if (off < 0 || facet.kind == FacetKind::R)
            continue;
        // Both owners must share the d or x regime; otherwise theta = 0.
        int regime = -1;
        double slab_dt = 0.0;
        bool same = true;
        for (int slot = 0; slot < 2; ++slot) {
            const int o = facet.owner[slot];
            if (o < 0)
                continue;
            const int r = static_cast<int>(tau_eps(mesh.elements[o], epsilon).regime);
            slab_dt = mesh.elements[o].slab_dt;
            if (regime < 0)
                regime = r;
            else if (regime != r)
                same = false;
        }
        if (!same || regime == static_cast<int>(Regime::c))
            continue;
        const double scale = regime == static_cast<int>(Regime::d) ? slab_dt : slab_dt * std::sqrt(epsilon);
        const auto qd = facet_degrees(facet, layout.p_t, layout.p_s);
        const FacetBasis fb(qd[0], qd[1]);
        const double dtf = facet_dt(mesh, facet);
        const Vector kc = w.segment(n * ne + off, fb.size());
        Matrix m = Matrix::Zero(fb.size(), fb.size());
        Vector b = Vector::Zero(fb.size());
        facet_points(mesh, facet, 0, fr, fp);
        for (const auto& p : fp) {
            fb.eval(p.s, phv, sg);
            m.noalias() += p.weight * phv * phv.transpose();
            b += p.weight * scale * (2.0 / dtf) * sg.row(0).dot(kc) * phv;
        }
        y.segment(n * ne + off, fb.size()) = m.ldlt().solve(b);
    }
    return y;
}

InfSupReport probe_inf_sup(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                           int samples, unsigned seed, int max_dofs)
{
    const auto g = assemble_global(mesh, problem, params);
    const int dim = g.num_u + g.num_lambda;
    if (dim > max_dofs)
        throw ConfigurationError("inf-sup probe limited to " + std::to_string(max_dofs) + " dofs, mesh has " +
                                 std::to_string(dim));
    const auto gram = assemble_norm_gram(mesh, g.layout, problem, assembly_points(params.p_t, params.p_s));
    const Matrix a = g.A.to_dense();
    const Matrix gs = Matrix(gram.s());
    const Matrix gss = Matrix(gram.ss());
    Eigen::LLT<Matrix> llt(gs);
    if (llt.info() != Eigen::Success)
        throw SolverError("s-norm Gram matrix is not positive definite");
    const Matrix h = a.transpose() * llt.solve(a);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()), gss, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw SolverError("inf-sup eigenproblem failed");
    InfSupReport r;
    r.dofs = dim;
    r.inf_sup = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    r.worst_y_ratio = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Vector w(dim);
        for (int i = 0; i < dim; ++i)
            w[i] = normal(rng);
        const Vector y = time_derivative_test_function(mesh, g.layout, problem.epsilon, w);
        const double ws = w.dot(gs * w);
        r.worst_y_ratio = std::min(r.worst_y_ratio, y.dot(a * w) / ws);
        r.max_y_stability = std::max(r.max_y_stability, std::sqrt(y.dot(gs * y) / ws));
    }
    if (samples < 1)
        r.worst_y_ratio = 0.0;
    return r;
}

SpaceTimeMesh layered_mesh(const ProblemSpec& problem, int n, int layers)
{
    UniformGrid grid = problem.domain;
    grid.nx = grid.ny = n;
    std::vector<double> times;
    for (int k = 0; k <= layers; ++k)
        times.push_back(problem.final_time * k / layers);
    MeshOptions opt;
    opt.partition = problem.partition;
    return build_mesh(grid, times, problem.deformation, problem.final_time, opt);
}

std::vector<SpaceTimeMesh> window_levels(const ProblemSpec& problem, int n0, double dt0, double amplitude)
{
    std::vector<SpaceTimeMesh> out;
    for (int k = 0; k < 3; ++k) {
        const int n = n0 << k;
        UniformGrid grid = problem.domain;
        grid.nx = grid.ny = n;
        std::vector<double> times;
        for (int j = 0; j <= (1 << k); ++j)
            times.push_back(dt0 * j / (1 << k));
        MeshOptions opt;
        opt.partition = problem.partition;
        out.push_back(build_mesh(grid, times, DeformationMap{amplitude}, problem.final_time, opt));
    }
    return out;
}

} // namespace sthdg
