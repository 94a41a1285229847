#include "sthdg/hdg.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/norms.hpp"
#include "sthdg/quadrature.hpp"

namespace sthdg {

int threads_from_env()
{
    if (const char* v = std::getenv("STHDG_THREADS")) {
        const int n = std::atoi(v);
        if (n >= 1)
            return n;
    }
    return 1;
}

namespace {

// Static block partition; each index is handled by exactly one thread.
template <class F>
void parallel_for(int n, int threads, F&& fn)
{
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = t * n / threads; i < (t + 1) * n / threads; ++i)
                    fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

void check_params(const HdgParams& params)
{
    if (params.p_t < 0 || params.p_s < 0 || params.p_t > 12 || params.p_s > 12)
        throw ConfigurationError("polynomial degrees must lie in [0, 12]");
    if (!(params.alpha > 0.0))
        throw ConfigurationError("penalty alpha must be positive");
}

} // namespace

LocalBlocks local_forms(const SpaceTimeMesh& mesh, int element, const TraceLayout& layout,
                        const ProblemSpec& problem, const HdgParams& params, const std::vector<double>& beta_s,
                        const InflowFunction* inflow)
{
    check_params(params);
    const auto& el = mesh.elements[element];
    const double eps = problem.epsilon;
    const TensorBasis basis(params.p_t, params.p_s);
    const int n = basis.size();
    const int nq = assembly_points(params.p_t, params.p_s);
    const auto tmap = element_trace_map(mesh, layout, element);
    const int nl = tmap.size();

    LocalBlocks b;
    b.Auu = Matrix::Zero(n, n);
    b.Aul = Matrix::Zero(n, nl);
    b.Alu = Matrix::Zero(nl, n);
    b.All = Matrix::Zero(nl, nl);
    b.bu = Vector::Zero(n);
    b.bl = Vector::Zero(nl);
    b.dofs = tmap.global;

    Vector psi, phi;
    Eigen::Matrix<double, 3, Eigen::Dynamic> rg;

    const auto vrule = tensor_rule_3d(nq, nq);
    for (std::size_t q = 0; q < vrule.size(); ++q) {
        const Vec3& xi = vrule.points[q];
        const auto g = geometry(el, xi, element);
        const Vec3 x = map_point(el, xi);
        const double w = vrule.weights[q] * g.det;
        basis.eval(xi, psi, rg);
        const Matrix pg = g.inv.transpose() * rg;
        const Vec3 beta = problem.beta(x[0], x.tail<2>());
        const Vector bg = pg.transpose() * beta; // beta . grad psi_i
        if (eps != 0.0)
            b.Auu.noalias() += (w * eps) * pg.bottomRows(2).transpose() * pg.bottomRows(2);
        b.Auu.noalias() -= w * bg * psi.transpose();
        b.bu += (w * problem.f(x[0], x.tail<2>())) * psi;
    }

    const auto frule = tensor_rule_2d(nq, nq);
    std::vector<FacetPoint> fp;
    const double pen = eps * params.alpha / el.h;
    for (int f = 0; f < 6; ++f)
        for (int id : el.face_facets[f]) {
            const auto& facet = mesh.facets[id];
            const int slot = facet.owner[0] == element && facet.face[0] == f ? 0 : 1;
            int lo = -1, nf = 0;
            for (std::size_t k = 0; k < tmap.facets.size(); ++k)
                if (tmap.facets[k] == id) {
                    lo = tmap.local[k];
                    nf = layout.count[id];
                }
            const bool q_face = facet.kind == FacetKind::Q;
            const bool neumann = facet.tag == BoundaryTag::neumann;
            const bool inflow_face = facet.tag == BoundaryTag::inflow_interface;
            if (neumann && !problem.has_neumann())
                throw ConfigurationError("missing Neumann data on facet " + std::to_string(id));
            if (inflow_face && !inflow)
                throw ConfigurationError("missing inflow data on facet " + std::to_string(id));
            const auto qd = facet_degrees(facet, params.p_t, params.p_s);
            const FacetBasis fb(qd[0], qd[1]);
            const double bs = beta_s[id];
            facet_points(mesh, facet, slot, frule, fp);
            for (const auto& p : fp) {
                const auto g = geometry(el, p.xi, element);
                basis.eval(p.xi, psi, rg);
                const Vec3 beta = problem.beta(p.x[0], p.x.tail<2>());
                const double bn = beta.dot(p.normal);
                const double w = p.weight;
                b.Auu.noalias() += (w * bs) * psi * psi.transpose();
                Vector dn;
                if (q_face && eps != 0.0) {
                    const Matrix pg = g.inv.transpose() * rg;
                    dn = pg.bottomRows(2).transpose() * p.normal.tail<2>();
                    b.Auu.noalias() += (w * pen) * psi * psi.transpose();
                    b.Auu.noalias() -= (w * eps) * (dn * psi.transpose() + psi * dn.transpose());
                }
                if (lo < 0)
                    continue;
                fb.eval(p.s, phi);
                auto Aul = b.Aul.middleCols(lo, nf);
                auto Alu = b.Alu.middleRows(lo, nf);
                auto All = b.All.block(lo, lo, nf, nf);
                Aul.noalias() += (w * (bn - bs)) * psi * phi.transpose();
                Alu.noalias() -= (w * bs) * phi * psi.transpose();
                All.noalias() += (w * (bs - bn)) * phi * phi.transpose();
                if (q_face && eps != 0.0) {
                    Aul.noalias() += w * (eps * dn - pen * psi) * phi.transpose();
                    Alu.noalias() += w * phi * (eps * dn - pen * psi).transpose();
                    All.noalias() += (w * pen) * phi * phi.transpose();
                }
                if (neumann) {
                    All.noalias() += (w * zeta_plus(bn) * bn) * phi * phi.transpose();
                    BoundaryPoint bp;
                    bp.t = p.x[0];
                    bp.x = p.x.tail<2>();
                    bp.normal = p.normal;
                    bp.side = facet.side;
                    b.bl.segment(lo, nf) += (w * problem.neumann_data(bp)) * phi;
                }
                if (inflow_face)
                    b.bl.segment(lo, nf) += (w * (*inflow)(p.lattice[1], p.lattice[2])) * phi;
            }
        }
    return b;
}

Condensed condense(const LocalBlocks& blocks, long element)
{
    Condensed c;
    c.lu.compute(blocks.Auu);
    const double rc = c.lu.rcond();
    if (!(rc > 1e-14) || !std::isfinite(rc))
        throw SolverError("singular local matrix A_uu in element " + std::to_string(element), element);
    c.Aul = blocks.Aul;
    c.bu = blocks.bu;
    if (blocks.Aul.cols() > 0) {
        const Matrix x = c.lu.solve(blocks.Aul);
        c.S = blocks.All - blocks.Alu * x;
    } else {
        c.S = blocks.All;
    }
    c.rhs = blocks.bl - blocks.Alu * c.lu.solve(blocks.bu);
    return c;
}

SlabSystem assemble_slab(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                         const InflowFunction* inflow)
{
    check_params(params);
    if (!mesh.has_topology())
        throw TopologyError("assemble_slab: mesh has no facet topology");
    for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
        const auto& f = mesh.facets[i];
        if (f.coarse_slot >= 0 && (f.child < 0 || f.child > 3))
            throw TopologyError("dangling hanging facet " + std::to_string(i));
    }
    SlabSystem sys;
    sys.layout = make_layout(mesh, params.p_t, params.p_s);
    const auto bs = facet_beta_s(mesh, problem, params.p_t, params.p_s);
    const int ne = static_cast<int>(mesh.elements.size());
    sys.blocks.resize(ne);
    sys.condensed.resize(ne);
    parallel_for(ne, params.threads, [&](int e) {
        sys.blocks[e] = local_forms(mesh, e, sys.layout, problem, params, bs, inflow);
        sys.condensed[e] = condense(sys.blocks[e], e);
    });

    const int nt = std::max(1, sys.layout.total);
    std::vector<Triplet> trip;
    std::size_t nnz = 0;
    for (const auto& b : sys.blocks)
        nnz += b.dofs.size() * b.dofs.size();
    trip.reserve(nnz);
    sys.rhs = Vector::Zero(nt);
    for (int e = 0; e < ne; ++e) {
        const auto& d = sys.blocks[e].dofs;
        const auto& c = sys.condensed[e];
        for (std::size_t i = 0; i < d.size(); ++i) {
            sys.rhs[d[i]] += c.rhs[i];
            for (std::size_t j = 0; j < d.size(); ++j)
                trip.emplace_back(d[i], d[j], c.S(i, j));
        }
    }
    if (sys.layout.total == 0)
        trip.emplace_back(0, 0, 1.0);
    sys.S = CsrMatrix::from_triplets(nt, trip);
    // Traces with no coupling at all (eps = 0 and beta.n = 0 on a Q facet) are
    // pinned to zero; they do not enter any element equation.
    std::vector<char> used(nt, 0);
    for (int i = 0; i < nt; ++i)
        for (int k = sys.S.row_ptr[i]; k < sys.S.row_ptr[i + 1]; ++k)
            if (sys.S.val[k] != 0.0)
                used[i] = used[sys.S.col[k]] = 1;
    bool pinned = false;
    for (int i = 0; i < nt && sys.layout.total > 0; ++i)
        if (!used[i] && sys.rhs[i] == 0.0) {
            trip.emplace_back(i, i, 1.0);
            pinned = true;
        }
    if (pinned)
        sys.S = CsrMatrix::from_triplets(nt, trip);
    return sys;
}

std::vector<Vector> recover_element_solution(const SlabSystem& system, const Vector& lambda)
{
    std::vector<Vector> u(system.blocks.size());
    for (std::size_t e = 0; e < u.size(); ++e) {
        const auto& d = system.blocks[e].dofs;
        Vector loc(d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            loc[i] = lambda[d[i]];
        const auto& c = system.condensed[e];
        u[e] = c.lu.solve(c.bu - c.Aul * loc);
    }
    return u;
}

double uncondensed_residual(const SlabSystem& system, const std::vector<Vector>& u, const Vector& lambda)
{
    double r2 = 0.0, b2 = 0.0;
    Vector rl = Vector::Zero(std::max(1, system.layout.total));
    Vector bl = Vector::Zero(rl.size());
    for (std::size_t e = 0; e < system.blocks.size(); ++e) {
        const auto& b = system.blocks[e];
        Vector loc(b.dofs.size());
        for (std::size_t i = 0; i < b.dofs.size(); ++i)
            loc[i] = lambda[b.dofs[i]];
        r2 += (b.Auu * u[e] + b.Aul * loc - b.bu).squaredNorm();
        b2 += b.bu.squaredNorm();
        const Vector t = b.Alu * u[e] + b.All * loc;
        for (std::size_t i = 0; i < b.dofs.size(); ++i) {
            rl[b.dofs[i]] += t[i] - b.bl[i];
            bl[b.dofs[i]] += b.bl[i];
        }
    }
    r2 += rl.squaredNorm();
    b2 += bl.squaredNorm();
    return b2 > 0.0 ? std::sqrt(r2 / b2) : std::sqrt(r2);
}

GlobalSystem assemble_global(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                             const InflowFunction* inflow)
{
    check_params(params);
    GlobalSystem g;
    g.layout = make_layout(mesh, params.p_t, params.p_s);
    const auto bs = facet_beta_s(mesh, problem, params.p_t, params.p_s);
    const int n = TensorBasis(params.p_t, params.p_s).size();
    const int ne = static_cast<int>(mesh.elements.size());
    g.num_u = ne * n;
    g.num_lambda = g.layout.total;
    const int dim = g.num_u + g.num_lambda;
    g.b = Vector::Zero(dim);
    std::vector<Triplet> trip;
    for (int e = 0; e < ne; ++e) {
        const auto b = local_forms(mesh, e, g.layout, problem, params, bs, inflow);
        const int u0 = e * n;
        const auto& d = b.dofs;
        for (int i = 0; i < n; ++i) {
            g.b[u0 + i] += b.bu[i];
            for (int j = 0; j < n; ++j)
                trip.emplace_back(u0 + i, u0 + j, b.Auu(i, j));
            for (std::size_t m = 0; m < d.size(); ++m)
                trip.emplace_back(u0 + i, g.num_u + d[m], b.Aul(i, m));
        }
        for (std::size_t l = 0; l < d.size(); ++l) {
            g.b[g.num_u + d[l]] += b.bl[l];
            for (int j = 0; j < n; ++j)
                trip.emplace_back(g.num_u + d[l], u0 + j, b.Alu(l, j));
            for (std::size_t m = 0; m < d.size(); ++m)
                trip.emplace_back(g.num_u + d[l], g.num_u + d[m], b.All(l, m));
        }
    }
    g.A = CsrMatrix::from_triplets(dim, trip);
    return g;
}

SolverKind parse_solver(const std::string& name)
{
    if (name == "direct")
        return SolverKind::direct;
    if (name == "gmres")
        return SolverKind::gmres;
    throw ConfigurationError("unknown solver '" + name + "'");
}

SlabSolution solve_slab(std::shared_ptr<const SpaceTimeMesh> mesh, const ProblemSpec& problem,
                        const HdgParams& params, const SolverOptions& solver, const InflowFunction* inflow,
                        SlabStats* stats, DirectSolver* reuse)
{
    const auto sys = assemble_slab(*mesh, problem, params, inflow);
    Vector lambda;
    int iterations = 0;
    if (sys.layout.total == 0) {
        lambda = Vector::Zero(0);
    } else if (solver.kind == SolverKind::direct) {
        DirectSolver local;
        DirectSolver& ds = reuse ? *reuse : local;
        ds.factorize(sys.S);
        lambda = ds.solve(sys.rhs);
    } else {
        auto r = gmres_solve(sys.S, sys.rhs, solver.restart, solver.tol, solver.maxit, solver.preconditioner);
        lambda = std::move(r.x);
        iterations = r.iterations;
    }
    SlabSolution out;
    out.mesh = std::move(mesh);
    out.layout = sys.layout;
    out.u = recover_element_solution(sys, lambda);
    out.lambda = lambda;
    if (stats) {
        stats->trace_dofs = sys.layout.total;
        stats->elements = static_cast<long>(out.mesh->elements.size());
        stats->residual = uncondensed_residual(sys, out.u, lambda);
        stats->iterations = iterations;
    }
    return out;
}

MarchResult march(const ProblemSpec& problem, const MeshSequence& meshes, const HdgParams& params,
                  const SolverOptions& solver, const std::function<void(int, const SlabSolution&)>& on_slab)
{
    if (meshes.count < 1 || !meshes.build)
        throw ConfigurationError("march: empty mesh sequence");
    MarchResult result;
    result.solution.p_t = params.p_t;
    result.solution.p_s = params.p_s;
    DirectSolver direct;
    for (int n = 0; n < meshes.count; ++n) {
        std::shared_ptr<const SpaceTimeMesh> mesh;
        std::unique_ptr<InflowTrace> trace;
        InflowFunction inflow;
        if (n == 0) {
            mesh = std::make_shared<const SpaceTimeMesh>(meshes.build(0, nullptr));
        } else {
            const auto& prev = result.solution.slabs.back();
            const auto layout = prev.mesh->top_layout();
            mesh = std::make_shared<const SpaceTimeMesh>(meshes.build(n, &layout));
            if (std::abs(mesh->t_begin() - prev.mesh->t_end()) > 1e-12)
                throw TopologyError("slab " + std::to_string(n) + " does not start where slab " +
                                    std::to_string(n - 1) + " ends");
            if (mesh->grid.nx != prev.mesh->grid.nx || mesh->grid.ny != prev.mesh->grid.ny)
                throw TopologyError("slab " + std::to_string(n) + " has a different root grid");
            trace = std::make_unique<InflowTrace>(prev, params.p_t, params.p_s);
            inflow = [&t = *trace](double lx, double ly) { return t(lx, ly); };
        }
        SlabStats st;
        auto slab = solve_slab(mesh, problem, params, solver, n == 0 ? nullptr : &inflow, &st, &direct);
        result.stats.push_back(st);
        if (on_slab)
            on_slab(n, slab);
        result.solution.slabs.push_back(std::move(slab));
    }
    return result;
}

} // namespace sthdg
