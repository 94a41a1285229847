#include "sthdg/norms.hpp"

#include <cmath>

#include "sthdg/errors.hpp"
#include "sthdg/quadrature.hpp"

namespace sthdg {

const char* to_string(Regime r)
{
    switch (r) {
    case Regime::d: return "d";
    case Regime::x: return "x";
    case Regime::c: return "c";
    }
    return "?";
}

TauEps tau_eps(double dt, double h, double slab_dt, double epsilon)
{
    // With dt <= h this is exactly the three-way split; it also tags dt > h.
    TauEps t;
    if (h <= epsilon)
        t.regime = Regime::d;
    else if (dt <= epsilon)
        t.regime = Regime::x;
    else
        t.regime = Regime::c;
    switch (t.regime) {
    case Regime::d: t.value = slab_dt; break;
    case Regime::x: t.value = slab_dt * std::sqrt(epsilon); break;
    case Regime::c: t.value = slab_dt * epsilon; break;
    }
    return t;
}

TauEps tau_eps(const Element& e, double epsilon) { return tau_eps(e.dt, e.h, e.slab_dt, epsilon); }

double beta_s(const SpaceTimeMesh& mesh, const Facet& facet, const ProblemSpec& problem, int n,
              const std::vector<int>& gauss_sizes)
{
    QuadratureRule2D pts;
    const int m = std::max(1, n);
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j)
            pts.points.emplace_back(-1.0 + 2.0 * i / m, -1.0 + 2.0 * j / m);
    for (int g : gauss_sizes) {
        const auto r = tensor_rule_2d(g, g);
        pts.points.insert(pts.points.end(), r.points.begin(), r.points.end());
    }
    pts.weights.assign(pts.points.size(), 1.0);
    std::vector<FacetPoint> fp;
    facet_points(mesh, facet, 0, pts, fp);
    double best = 0.0;
    for (const auto& p : fp)
        best = std::max(best, std::abs(problem.beta(p.x[0], p.x.tail<2>()).dot(p.normal)));
    return best;
}

std::vector<double> facet_beta_s(const SpaceTimeMesh& mesh, const ProblemSpec& problem, int p_t, int p_s,
                                 int oversample)
{
    const int na = assembly_points(p_t, p_s);
    const std::vector<int> sizes{na, error_points(p_t, p_s)};
    std::vector<double> out(mesh.facets.size());
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& f = mesh.facets[i];
        // R-facets have beta.n = +-1 exactly.
        out[i] = f.kind == FacetKind::R ? 1.0 : beta_s(mesh, f, problem, oversample * na, sizes);
    }
    return out;
}

Matrix element_mass(const SpaceTimeMesh& mesh, int element, const TensorBasis& basis, int nq)
{
    const auto rule = tensor_rule_3d(nq, nq);
    const auto& e = mesh.elements[element];
    Matrix m = Matrix::Zero(basis.size(), basis.size());
    Vector v;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto g = geometry(e, rule.points[q], element);
        basis.eval(rule.points[q], v);
        m.noalias() += rule.weights[q] * g.det * v * v.transpose();
    }
    return m;
}

Matrix facet_mass(const SpaceTimeMesh& mesh, int facet, const FacetBasis& basis, int nq)
{
    const auto rule = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    facet_points(mesh, mesh.facets[facet], 0, rule, fp);
    Matrix m = Matrix::Zero(basis.size(), basis.size());
    Vector v;
    for (const auto& p : fp) {
        basis.eval(p.s, v);
        m.noalias() += p.weight * v * v.transpose();
    }
    return m;
}

Vector project_volume(const SpaceTimeMesh& mesh, int element, const TensorBasis& basis,
                      const std::function<double(const Vec3&, const Vec3&)>& target, int nq)
{
    const auto rule = tensor_rule_3d(nq, nq);
    const auto& e = mesh.elements[element];
    Matrix m = Matrix::Zero(basis.size(), basis.size());
    Vector b = Vector::Zero(basis.size()), v;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto g = geometry(e, rule.points[q], element);
        basis.eval(rule.points[q], v);
        const double w = rule.weights[q] * g.det;
        m.noalias() += w * v * v.transpose();
        b += w * target(rule.points[q], map_point(e, rule.points[q])) * v;
    }
    Eigen::LDLT<Matrix> ldlt(m);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw GeometryError("singular element mass matrix", element);
    return ldlt.solve(b);
}

Vector project_facet(const SpaceTimeMesh& mesh, int facet, const FacetBasis& basis,
                     const std::function<double(const Vec2&, const Vec3&)>& target, int nq)
{
    const auto rule = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    facet_points(mesh, mesh.facets[facet], 0, rule, fp);
    Matrix m = Matrix::Zero(basis.size(), basis.size());
    Vector b = Vector::Zero(basis.size()), v;
    for (const auto& p : fp) {
        basis.eval(p.s, v);
        m.noalias() += p.weight * v * v.transpose();
        b += p.weight * target(p.s, p.x) * v;
    }
    Eigen::LDLT<Matrix> ldlt(m);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw GeometryError("singular facet mass matrix", facet);
    return ldlt.solve(b);
}

double NormBreakdown::v() const { return std::sqrt(v2()); }
double NormBreakdown::s() const { return std::sqrt(s2()); }
double NormBreakdown::ss() const { return std::sqrt(ss2()); }

NormBreakdown& NormBreakdown::operator+=(const NormBreakdown& o)
{
    volume += o.volume;
    advective_jump += o.advective_jump;
    neumann += o.neumann;
    diffusive_grad += o.diffusive_grad;
    diffusive_jump += o.diffusive_jump;
    time_derivative += o.time_derivative;
    streamline += o.streamline;
    return *this;
}

MeshList meshes_of(const Solution& solution)
{
    MeshList out;
    for (const auto& s : solution.slabs)
        out.push_back(s.mesh);
    return out;
}

namespace {

std::array<LatticeBox, 4> quarters(const LatticeBox& r)
{
    std::array<LatticeBox, 4> q;
    const long h = r.size / 2;
    for (int c = 0; c < 4; ++c) {
        q[c] = r;
        q[c].size = h;
        q[c].lo[1] = r.lo[1] + ((c >> 1) & 1) * h;
        q[c].lo[2] = r.lo[2] + (c & 1) * h;
    }
    return q;
}

bool spatially_contains(const LatticeBox& outer, const LatticeBox& inner)
{
    for (int a = 1; a < 3; ++a)
        if (inner.lo[a] < outer.lo[a] || inner.lo[a] + inner.size > outer.lo[a] + outer.size)
            return false;
    return true;
}

} // namespace

NormBreakdown evaluate_norms(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair,
                             int p_t, int p_s, int nq)
{
    const double eps = problem.epsilon;
    const TensorBasis basis(p_t, p_s);
    const int n = basis.size();
    const auto vrule = tensor_rule_3d(nq, nq);
    const auto frule = tensor_rule_2d(nq, nq);
    NormBreakdown total;
    std::vector<FacetPoint> fp;
    Vector psi;

    for (std::size_t k = 0; k < slabs.size(); ++k) {
        const auto& mesh = *slabs[k];
        const auto bs = facet_beta_s(mesh, problem, p_t, p_s);
        const SpaceTimeMesh* next = k + 1 < slabs.size() ? slabs[k + 1].get() : nullptr;
        const int slab = static_cast<int>(k);

        for (std::size_t ei = 0; ei < mesh.elements.size(); ++ei) {
            const int e = static_cast<int>(ei);
            const auto& el = mesh.elements[e];
            const auto tau = tau_eps(el, eps);
            const double wk = el.dt * el.h * el.h / (el.dt + el.h);
            Matrix m = Matrix::Zero(n, n);
            Vector b = Vector::Zero(n);
            for (std::size_t q = 0; q < vrule.size(); ++q) {
                const Vec3& xi = vrule.points[q];
                const auto g = geometry(el, xi, e);
                const Vec3 x = map_point(el, xi);
                const double w = vrule.weights[q] * g.det;
                double v;
                Vec3 grad;
                pair.element(slab, e, xi, x, g, v, grad);
                const Vec3 beta = problem.beta(x[0], x.tail<2>());
                total.volume += w * v * v;
                total.diffusive_grad += eps * w * (grad[1] * grad[1] + grad[2] * grad[2]);
                total.time_derivative += tau.value * w * grad[0] * grad[0];
                basis.eval(xi, psi);
                m.noalias() += w * psi * psi.transpose();
                b += w * beta.dot(grad) * psi;
            }
            total.streamline += wk * b.dot(Eigen::LDLT<Matrix>(m).solve(b));

            auto accumulate = [&](const FacetPoint& p, double mu, bool q_face, double beta_s_f) {
                double v;
                Vec3 grad;
                const auto g = geometry(el, p.xi, e);
                pair.element(slab, e, p.xi, p.x, g, v, grad);
                const double bn = problem.beta(p.x[0], p.x.tail<2>()).dot(p.normal);
                const double jump = v - mu;
                total.advective_jump += p.weight * std::abs(beta_s_f - 0.5 * bn) * jump * jump;
                if (q_face)
                    total.diffusive_jump += eps / el.h * p.weight * jump * jump;
            };

            for (int f = 0; f < 6; ++f)
                for (int id : el.face_facets[f]) {
                    const auto& facet = mesh.facets[id];
                    const int slot = facet.owner[0] == e && facet.face[0] == f ? 0 : 1;
                    const bool q_face = facet.kind == FacetKind::Q;
                    if (facet.tag == BoundaryTag::outflow_interface && next) {
                        // Trace lives on the next slab's inflow facets.
                        std::function<void(const LatticeBox&)> visit = [&](const LatticeBox& region) {
                            const long half = region.size / 2;
                            const Vec3 c(0.0, double(region.lo[1] + half), double(region.lo[2] + half));
                            const int ne = next->locate(c);
                            if (ne < 0)
                                throw TopologyError("slab interface mismatch in norm evaluation");
                            const auto& nel = next->elements[ne];
                            if (nel.box.size >= region.size)
                                for (int nid : nel.face_facets[0]) {
                                    const auto& nf = next->facets[nid];
                                    if (nf.box.size >= region.size && spatially_contains(nf.box, region)) {
                                        face_region_points(mesh, e, f, region, frule, fp);
                                        for (const auto& p : fp) {
                                            const Vec2 s = region_coords(nf.box, 0, p.lattice);
                                            accumulate(p, pair.trace(slab + 1, nid, s, p.x), false, bs[id]);
                                        }
                                        return;
                                    }
                                }
                            if (region.size < 2)
                                throw TopologyError("slab interface mismatch in norm evaluation");
                            for (const auto& qr : quarters(region))
                                visit(qr);
                        };
                        visit(facet.box);
                        continue;
                    }
                    facet_points(mesh, facet, slot, frule, fp);
                    for (const auto& p : fp) {
                        const double mu = pair.trace(slab, id, p.s, p.x);
                        accumulate(p, mu, q_face, bs[id]);
                        if (facet.tag == BoundaryTag::neumann && slot == 0) {
                            const double bn = problem.beta(p.x[0], p.x.tail<2>()).dot(p.normal);
                            total.neumann += p.weight * 0.5 * std::abs(bn) * mu * mu;
                        }
                    }
                }
        }
    }
    return total;
}

PairEvaluator discrete_pair(const Solution& solution)
{
    auto basis = std::make_shared<TensorBasis>(solution.p_t, solution.p_s);
    const Solution* sol = &solution;
    PairEvaluator p;
    p.element = [basis, sol](int slab, int e, const Vec3& xi, const Vec3&, const MappedGeometry& g, double& v,
                             Vec3& grad) {
        Vector val;
        Eigen::Matrix<double, 3, Eigen::Dynamic> rg;
        basis->eval(xi, val, rg);
        const Vector& c = sol->slabs[slab].u[e];
        v = val.dot(c);
        grad = g.inv.transpose() * (rg * c);
    };
    p.trace = [sol](int slab, int facet, const Vec2& s, const Vec3&) {
        return eval_trace(sol->slabs[slab], facet, s);
    };
    return p;
}

PairEvaluator exact_pair(const ProblemSpec& problem)
{
    if (!problem.has_exact())
        throw ConfigurationError("problem '" + problem.name + "' has no exact solution");
    auto u = problem.exact;
    auto du = problem.exact_grad;
    PairEvaluator p;
    p.element = [u, du](int, int, const Vec3&, const Vec3& x, const MappedGeometry&, double& v, Vec3& grad) {
        v = u(x[0], x.tail<2>());
        grad = du(x[0], x.tail<2>());
    };
    p.trace = [u](int, int, const Vec2&, const Vec3& x) { return u(x[0], x.tail<2>()); };
    return p;
}

PairEvaluator difference(PairEvaluator a, PairEvaluator b)
{
    PairEvaluator p;
    p.element = [a, b](int slab, int e, const Vec3& xi, const Vec3& x, const MappedGeometry& g, double& v,
                       Vec3& grad) {
        double va, vb;
        Vec3 ga, gb;
        a.element(slab, e, xi, x, g, va, ga);
        b.element(slab, e, xi, x, g, vb, gb);
        v = va - vb;
        grad = ga - gb;
    };
    p.trace = [a, b](int slab, int f, const Vec2& s, const Vec3& x) {
        return a.trace(slab, f, s, x) - b.trace(slab, f, s, x);
    };
    return p;
}

PairEvaluator scaled(PairEvaluator a, double c)
{
    PairEvaluator p;
    p.element = [a, c](int slab, int e, const Vec3& xi, const Vec3& x, const MappedGeometry& g, double& v,
                       Vec3& grad) {
        a.element(slab, e, xi, x, g, v, grad);
        v *= c;
        grad *= c;
    };
    p.trace = [a, c](int slab, int f, const Vec2& s, const Vec3& x) { return c * a.trace(slab, f, s, x); };
    return p;
}

double norm_v(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s)
{
    return evaluate_norms(slabs, problem, pair, p_t, p_s, error_points(p_t, p_s)).v();
}

double norm_s(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s)
{
    return evaluate_norms(slabs, problem, pair, p_t, p_s, error_points(p_t, p_s)).s();
}

double norm_ss(const MeshList& slabs, const ProblemSpec& problem, const PairEvaluator& pair, int p_t, int p_s)
{
    return evaluate_norms(slabs, problem, pair, p_t, p_s, error_points(p_t, p_s)).ss();
}

ErrorReport error_report(const Solution& solution, const ProblemSpec& problem)
{
    ErrorReport r;
    const auto slabs = meshes_of(solution);
    r.breakdown = evaluate_norms(slabs, problem, difference(exact_pair(problem), discrete_pair(solution)),
                                 solution.p_t, solution.p_s, error_points(solution.p_t, solution.p_s));
    r.num_slabs = static_cast<int>(slabs.size());
    for (const auto& m : slabs)
        r.cells_per_slab = std::max<long>(r.cells_per_slab, static_cast<long>(m->elements.size()));
    r.error_v = r.breakdown.v();
    r.error_s = r.breakdown.s();
    r.error_ss = r.breakdown.ss();
    return r;
}

std::vector<double> rates(const std::vector<double>& errors)
{
    if (errors.size() < 2)
        throw DomainError("rates: need at least two errors");
    for (double e : errors)
        if (!(e > 0.0))
            throw DomainError("rates: errors must be positive");
    std::vector<double> r;
    for (std::size_t i = 1; i < errors.size(); ++i)
        r.push_back(std::log2(errors[i - 1] / errors[i]));
    return r;
}

Eigen::SparseMatrix<double> NormGram::v() const
{
    Eigen::SparseMatrix<double> g = parts[0];
    for (int i = 1; i < 5; ++i)
        g += parts[i];
    return g;
}

Eigen::SparseMatrix<double> NormGram::s() const { return v() + parts[5]; }
Eigen::SparseMatrix<double> NormGram::ss() const { return s() + parts[6]; }

NormBreakdown NormGram::breakdown(const Vector& x) const
{
    double c[7];
    for (int i = 0; i < 7; ++i)
        c[i] = x.dot(parts[i] * x);
    NormBreakdown b;
    b.volume = c[0];
    b.advective_jump = c[1];
    b.neumann = c[2];
    b.diffusive_grad = c[3];
    b.diffusive_jump = c[4];
    b.time_derivative = c[5];
    b.streamline = c[6];
    return b;
}

NormGram assemble_norm_gram(const SpaceTimeMesh& mesh, const TraceLayout& layout, const ProblemSpec& problem,
                            int nq)
{
    const double eps = problem.epsilon;
    const int p_t = layout.p_t, p_s = layout.p_s;
    const TensorBasis basis(p_t, p_s);
    const int n = basis.size();
    const int ne = static_cast<int>(mesh.elements.size());
    NormGram gram;
    gram.num_u = ne * n;
    gram.num_lambda = layout.total;
    const int dim = gram.num_u + gram.num_lambda;
    const auto vrule = tensor_rule_3d(nq, nq);
    const auto frule = tensor_rule_2d(nq, nq);
    const auto bs = facet_beta_s(mesh, problem, p_t, p_s);
    std::array<std::vector<Eigen::Triplet<double>>, 7> trip;
    std::vector<FacetPoint> fp;
    Vector psi, phi;
    Eigen::Matrix<double, 3, Eigen::Dynamic> rg;

    for (int e = 0; e < ne; ++e) {
        const auto& el = mesh.elements[e];
        const auto tmap = element_trace_map(mesh, layout, e);
        const int nl = n + tmap.size();
        std::vector<int> gdof(nl);
        for (int i = 0; i < n; ++i)
            gdof[i] = e * n + i;
        for (int i = 0; i < tmap.size(); ++i)
            gdof[n + i] = gram.num_u + tmap.global[i];
        std::array<Matrix, 7> loc;
        for (auto& l : loc)
            l = Matrix::Zero(nl, nl);

        const auto tau = tau_eps(el, eps);
        const double wk = el.dt * el.h * el.h / (el.dt + el.h);
        Matrix m = Matrix::Zero(n, n), bmat = Matrix::Zero(n, n);
        for (std::size_t q = 0; q < vrule.size(); ++q) {
            const Vec3& xi = vrule.points[q];
            const auto g = geometry(el, xi, e);
            const Vec3 x = map_point(el, xi);
            const double w = vrule.weights[q] * g.det;
            basis.eval(xi, psi, rg);
            const Matrix pg = g.inv.transpose() * rg;
            const Vec3 beta = problem.beta(x[0], x.tail<2>());
            const Vector bg = pg.transpose() * beta;
            m.noalias() += w * psi * psi.transpose();
            bmat.noalias() += w * psi * bg.transpose();
            loc[0].topLeftCorner(n, n).noalias() += w * psi * psi.transpose();
            loc[3].topLeftCorner(n, n).noalias() += eps * w * pg.bottomRows(2).transpose() * pg.bottomRows(2);
            loc[5].topLeftCorner(n, n).noalias() += tau.value * w * pg.row(0).transpose() * pg.row(0);
        }
        loc[6].topLeftCorner(n, n) = wk * bmat.transpose() * Eigen::LDLT<Matrix>(m).solve(bmat);

        for (int f = 0; f < 6; ++f)
            for (int id : el.face_facets[f]) {
                const auto& facet = mesh.facets[id];
                const int slot = facet.owner[0] == e && facet.face[0] == f ? 0 : 1;
                int lo = -1, nf = 0;
                for (std::size_t k = 0; k < tmap.facets.size(); ++k)
                    if (tmap.facets[k] == id) {
                        lo = n + tmap.local[k];
                        nf = layout.count[id];
                    }
                const auto qd = facet_degrees(facet, p_t, p_s);
                const FacetBasis fb(qd[0], qd[1]);
                facet_points(mesh, facet, slot, frule, fp);
                for (const auto& p : fp) {
                    basis.eval(p.xi, psi);
                    Vector jv = Vector::Zero(nl);
                    jv.head(n) = psi;
                    if (lo >= 0) {
                        fb.eval(p.s, phi);
                        jv.segment(lo, nf) = -phi;
                    }
                    const double bn = problem.beta(p.x[0], p.x.tail<2>()).dot(p.normal);
                    loc[1].noalias() += p.weight * std::abs(bs[id] - 0.5 * bn) * jv * jv.transpose();
                    if (facet.kind == FacetKind::Q)
                        loc[4].noalias() += eps / el.h * p.weight * jv * jv.transpose();
                    if (facet.tag == BoundaryTag::neumann && slot == 0 && lo >= 0)
                        loc[2].block(lo, lo, nf, nf).noalias() += p.weight * 0.5 * std::abs(bn) * phi * phi.transpose();
                }
            }

        for (int c = 0; c < 7; ++c)
            for (int i = 0; i < nl; ++i)
                for (int j = 0; j < nl; ++j)
                    if (loc[c](i, j) != 0.0)
                        trip[c].emplace_back(gdof[i], gdof[j], loc[c](i, j));
    }
    for (int c = 0; c < 7; ++c) {
        gram.parts[c].resize(dim, dim);
        gram.parts[c].setFromTriplets(trip[c].begin(), trip[c].end());
    }
    return gram;
}

} // namespace sthdg
