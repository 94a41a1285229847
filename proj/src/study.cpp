#include "sthdg/study.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sthdg/errors.hpp"
#include "sthdg/geometry.hpp"
#include "sthdg/quadrature.hpp"
#include "sthdg/stability.hpp"

namespace sthdg {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigurationError("setting '" + key + "' expects a number, got '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v)
{
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9)
        throw ConfigurationError("setting '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw ConfigurationError("setting '" + key + "' expects a boolean, got '" + v + "'");
}

// Root cells needed for spacing `step` over `width`; the ratio must be integral.
int count_for(double width, double step, const char* what)
{
    const double r = width / step;
    const int n = static_cast<int>(std::lround(r));
    if (n < 1 || std::abs(r - n) > 1e-6 * r)
        throw ConfigurationError(std::string(what) + " does not divide the interval into whole cells");
    return n;
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sci(double v) { return fmt("%.16e", v); }

} // namespace

MeshFamily RunConfig::mesh_family() const
{
    if (family.empty())
        return make_case().family;
    return parse_mesh_family(family);
}

HdgParams RunConfig::hdg_params() const
{
    HdgParams p;
    p.p_t = p_t;
    p.p_s = p_s;
    p.alpha = penalty();
    p.threads = threads > 0 ? threads : threads_from_env();
    return p;
}

SolverOptions RunConfig::solver_options() const
{
    SolverOptions s;
    s.kind = parse_solver(solver);
    s.restart = gmres_restart;
    s.tol = gmres_tol;
    s.maxit = gmres_maxit;
    s.preconditioner = parse_preconditioner(preconditioner);
    return s;
}

CaseDescriptor RunConfig::make_case() const
{
    auto c = sthdg::make_case(case_name, epsilon, p_t, p_s, parse_beta_choice(beta), seed);
    if (amplitude >= 0.0)
        c.problem.deformation.amplitude = amplitude;
    return c;
}

int RunConfig::cells(int cycle) const
{
    const auto c = make_case();
    const double width = c.problem.domain.hi[0] - c.problem.domain.lo[0];
    return count_for(width, h, "h") << cycle;
}

int RunConfig::slabs(int cycle) const
{
    const auto c = make_case();
    return count_for(c.problem.final_time, dt, "dt") << cycle;
}

void validate(const RunConfig& c)
{
    if (c.cycles < 1)
        throw ConfigurationError("cycles must be at least 1");
    if (!(c.h > 0.0) || !(c.dt > 0.0))
        throw ConfigurationError("h and dt must be positive");
    if (c.dt > c.h * (1.0 + 1e-12))
        throw ConfigurationError("dt must not exceed h");
    if (c.p_t < 0 || c.p_s < 0 || c.p_t > 12 || c.p_s > 12)
        throw ConfigurationError("polynomial degrees must lie in [0, 12]");
    if (c.samples < 1)
        throw ConfigurationError("samples must be positive");
    if (!(c.epsilon > 0.0))
        throw ConfigurationError("epsilon must be positive");
    if (c.gmres_restart < 1 || c.gmres_maxit < 1 || !(c.gmres_tol > 0.0))
        throw ConfigurationError("invalid GMRES settings");
    c.make_case();
    c.mesh_family();
    parse_solver(c.solver);
    parse_preconditioner(c.preconditioner);
    c.cells(0);
    c.slabs(0);
}

void apply_setting(RunConfig& c, const std::string& key_in, const std::string& value_in)
{
    const std::string key = trim(key_in), v = trim(value_in);
    if (key == "case") c.case_name = v;
    else if (key == "epsilon" || key == "eps") c.epsilon = to_double(key, v);
    else if (key == "p") c.p_t = c.p_s = to_int(key, v);
    else if (key == "p_t") c.p_t = to_int(key, v);
    else if (key == "p_s") c.p_s = to_int(key, v);
    else if (key == "cycles") c.cycles = to_int(key, v);
    else if (key == "h") c.h = to_double(key, v);
    else if (key == "dt") c.dt = to_double(key, v);
    else if (key == "family" || key == "mesh") c.family = v;
    else if (key == "alpha") c.alpha = to_double(key, v);
    else if (key == "solver") c.solver = v;
    else if (key == "gmres_restart") c.gmres_restart = to_int(key, v);
    else if (key == "gmres_tol") c.gmres_tol = to_double(key, v);
    else if (key == "gmres_maxit") c.gmres_maxit = to_int(key, v);
    else if (key == "preconditioner") c.preconditioner = v;
    else if (key == "beta") c.beta = v;
    else if (key == "amplitude") c.amplitude = to_double(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "output") c.output = v;
    else if (key == "seed") c.seed = static_cast<unsigned>(to_int(key, v));
    else if (key == "threads") c.threads = to_int(key, v);
    else if (key == "table_display") c.table_display = to_bool(key, v);
    else if (key == "vtk") c.vtk = to_bool(key, v);
    else if (key == "chi") c.chi = to_double(key, v);
    else if (key == "samples") c.samples = to_int(key, v);
    else throw ConfigurationError("unknown setting '" + key + "'");
}

std::map<std::string, std::string> read_settings(std::istream& in)
{
    std::map<std::string, std::string> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigurationError("config line " + std::to_string(n) + ": expected key = value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigurationError("cannot open config file '" + path + "'");
    RunConfig c;
    for (const auto& [k, v] : read_settings(in))
        apply_setting(c, k, v);
    return c;
}

std::vector<ConvergenceRow> run_convergence(const RunConfig& config, std::ostream* log)
{
    validate(config);
    const auto cs = config.make_case();
    const auto family = config.mesh_family();
    const auto params = config.hdg_params();
    const auto solver = config.solver_options();
    std::vector<ConvergenceRow> rows;
    for (int cycle = 0; cycle < config.cycles; ++cycle) {
        ConvergenceRow row;
        try {
            const auto seq = case_sequence(cs.problem, family, config.cells(cycle), config.slabs(cycle));
            const auto result = march(cs.problem, seq, params, solver);
            for (const auto& s : result.stats)
                row.max_residual = std::max(row.max_residual, s.residual);
            const auto rep = error_report(result.solution, cs.problem);
            row.cells_per_slab = rep.cells_per_slab;
            row.num_slabs = rep.num_slabs;
            row.error_ss = rep.error_ss;
            row.error_s = rep.error_s;
            row.error_v = rep.error_v;
            row.breakdown = rep.breakdown;
        } catch (const Error& e) {
            throw Error("cycle " + std::to_string(cycle) + ": " + e.what());
        }
        if (!rows.empty()) {
            row.has_rate = true;
            const double prev = rows.back().error_ss;
            if (prev < kSaturatedError || row.error_ss < kSaturatedError)
                row.saturated = true;
            else
                row.rate = rates({prev, row.error_ss}).front();
        }
        if (log)
            *log << "cycle " << cycle << ": cells/slab " << row.cells_per_slab << ", slabs " << row.num_slabs
                 << ", error_ss " << sci(row.error_ss) << "\n";
        rows.push_back(row);
    }
    return rows;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows, bool table_display)
{
    auto num = [&](double v) { return table_display ? fmt("%.1e", v) : sci(v); };
    out << "cells_per_slab,num_slabs,error_ss,rate\n";
    for (const auto& r : rows) {
        out << r.cells_per_slab << "," << r.num_slabs << "," << num(r.error_ss) << ",";
        if (r.has_rate)
            out << (r.saturated ? std::string("saturated") : table_display ? fmt("%.1f", r.rate) : sci(r.rate));
        out << "\n";
    }
    out << "\n# breakdown (squared norm contributions)\n";
    out << "cycle,volume,advective_jump,neumann,diffusive_grad,diffusive_jump,time_derivative,streamline,"
           "error_v,error_s,max_residual\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& b = rows[i].breakdown;
        out << i << "," << num(b.volume) << "," << num(b.advective_jump) << "," << num(b.neumann) << ","
            << num(b.diffusive_grad) << "," << num(b.diffusive_jump) << "," << num(b.time_derivative) << ","
            << num(b.streamline) << "," << num(rows[i].error_v) << "," << num(rows[i].error_s) << ","
            << num(rows[i].max_residual) << "\n";
    }
}

double final_time_l2_error(const Solution& solution, const ProblemSpec& problem)
{
    if (solution.slabs.empty())
        throw ContractError("final_time_l2_error: empty solution");
    if (!problem.has_exact())
        throw ConfigurationError("final-time error needs an exact solution");
    const auto& slab = solution.slabs.back();
    const auto& mesh = *slab.mesh;
    const TensorBasis basis(solution.p_t, solution.p_s);
    const int nq = error_points(solution.p_t, solution.p_s);
    const auto rule = tensor_rule_2d(nq, nq);
    const double top = mesh.lattice_extent(0);
    std::vector<FacetPoint> fp;
    double e2 = 0.0;
    for (const auto& f : mesh.facets) {
        if (f.axis != 0 || f.box.lo[0] != top)
            continue;
        facet_points(mesh, f, 0, rule, fp);
        for (const auto& p : fp) {
            const double d = eval_element(basis, slab.u[f.owner[0]], p.xi) - problem.exact(p.x[0], p.x.tail<2>());
            e2 += p.weight * d * d;
        }
    }
    return std::sqrt(e2);
}

std::vector<double> corner_values(const SlabSolution& slab)
{
    const auto& mesh = *slab.mesh;
    const TensorBasis basis(slab.layout.p_t, slab.layout.p_s);
    std::vector<double> out;
    out.reserve(mesh.elements.size() * 8);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e)
        for (int c = 0; c < 8; ++c) {
            const Vec3 xi((c >> 2) & 1 ? 1.0 : -1.0, (c >> 1) & 1 ? 1.0 : -1.0, c & 1 ? 1.0 : -1.0);
            out.push_back(eval_element(basis, slab.u[e], xi));
        }
    return out;
}

SolveSummary run_solve(const RunConfig& config, std::ostream* log)
{
    validate(config);
    const auto cs = config.make_case();
    const auto family = config.mesh_family();
    const auto seq = case_sequence(cs.problem, family, config.cells(0), config.slabs(0));
    std::filesystem::create_directories(config.output_dir);
    SolveSummary summary;
    auto on_slab = [&](int n, const SlabSolution& slab) {
        if (config.vtk) {
            char name[64];
            std::snprintf(name, sizeof name, "slab_%03d.vtk", n);
            const auto path = (std::filesystem::path(config.output_dir) / name).string();
            write_vtk(path, *slab.mesh, corner_values(slab));
            summary.files.push_back(path);
        }
        if (log)
            *log << "slab " << n << " solved: " << slab.mesh->elements.size() << " elements\n";
    };
    const auto result = march(cs.problem, seq, config.hdg_params(), config.solver_options(), on_slab);
    summary.num_slabs = static_cast<int>(result.solution.slabs.size());
    for (const auto& s : result.solution.slabs)
        summary.cells_per_slab = std::max(summary.cells_per_slab, static_cast<long>(s.mesh->elements.size()));
    for (const auto& s : result.stats)
        summary.max_residual = std::max(summary.max_residual, s.residual);
    summary.has_exact = cs.problem.has_exact();
    if (summary.has_exact) {
        summary.final_l2_error = final_time_l2_error(result.solution, cs.problem);
        summary.error_ss = error_report(result.solution, cs.problem).error_ss;
    }
    const auto path = (std::filesystem::path(config.output_dir) / "summary.txt").string();
    std::ofstream out(path);
    if (!out)
        throw ConfigurationError("cannot write '" + path + "'");
    out << "case: " << cs.name << "\n"
        << "epsilon: " << sci(config.epsilon) << "\n"
        << "p_t: " << config.p_t << "\n"
        << "p_s: " << config.p_s << "\n"
        << "alpha: " << sci(config.penalty()) << "\n"
        << "family: " << to_string(family) << "\n"
        << "cells_per_slab: " << summary.cells_per_slab << "\n"
        << "num_slabs: " << summary.num_slabs << "\n"
        << "max_uncondensed_residual: " << sci(summary.max_residual) << "\n";
    if (summary.has_exact)
        out << "final_time_l2_error: " << sci(summary.final_l2_error) << "\n"
            << "error_ss: " << sci(summary.error_ss) << "\n";
    summary.files.push_back(path);
    return summary;
}

VerifyReport run_verify(const RunConfig& config)
{
    validate(config);
    VerifyReport r;
    auto add = [&](const std::string& k, const std::string& v) { r.lines.emplace_back(k, v); };
    auto verdict = [&](const std::string& k, bool ok) {
        add(k, ok ? "PASS" : "FAIL");
        r.pass = r.pass && ok;
    };
    const auto cs = config.make_case();
    const auto& problem = cs.problem;
    const double T = problem.final_time;
    const double chi = config.chi > 0.0 ? config.chi : 10.0 * T;
    const auto params = config.hdg_params();

    // Weight function bounds on a 1000-point grid.
    {
        const WeightFunction phi{T, chi};
        bool ok = true;
        const double lo = T >= 1.0 ? T + chi : std::exp(1.0 - T) + chi;
        const double hi = T >= 1.0 ? std::exp(1.0) * T + chi : std::exp(1.0) + chi;
        for (int i = 0; i < 1000; ++i) {
            const double t = T * i / 999.0;
            const double v = phi(t);
            ok = ok && v >= lo * (1 - 1e-14) && v <= hi * (1 + 1e-14) && -phi.derivative(t) >= 1.0 - 1e-14;
        }
        add("weight.chi", sci(chi));
        verdict("weight.bounds", ok);
    }

    // Weighted coercivity on a 3 x 3 x 2 mesh.
    const auto mesh = layered_mesh(problem, 3, 2);
    {
        const auto c = check_weighted_coercivity(mesh, problem, config.p_t, config.p_s, config.penalty(), chi,
                                                 config.samples, config.seed);
        add("constants.c_star", sci(c.constants.c_star));
        add("constants.chi_threshold", sci(c.constants.chi_threshold));
        add("constants.alpha_threshold", sci(c.constants.alpha_threshold));
        add("coercivity.alpha", sci(c.alpha));
        add("coercivity.alpha_below_threshold", c.alpha_below_threshold ? "yes (advisory)" : "no");
        add("coercivity.samples", std::to_string(c.ratios.size()));
        add("coercivity.worst_ratio", sci(c.worst_ratio));
        verdict("coercivity", c.pass);
    }

    // Inverse and trace inequalities, projection bounds: three levels over one window.
    {
        const int n0 = config.cells(0);
        const auto uniform = window_levels(problem, n0, config.dt, 0.0);
        const auto deformed = window_levels(problem, n0, config.dt, problem.deformation.amplitude);
        auto ptrs = [](const std::vector<SpaceTimeMesh>& v) {
            std::vector<const SpaceTimeMesh*> p;
            for (const auto& m : v)
                p.push_back(&m);
            return p;
        };
        const WeightFunction phi{T, chi};
        auto emit = [&](const std::string& prefix, const DriftReport& d, bool counts) {
            for (const auto& c : d.constants) {
                std::string vals;
                for (double v : c.values)
                    vals += (vals.empty() ? "" : " ") + fmt("%.6e", v);
                add(prefix + c.name, vals + " drift " + fmt("%.4f", c.drift));
            }
            if (counts)
                verdict(prefix + "drift", d.pass);
            else
                add(prefix + "drift", d.pass ? "below 10%" : "above 10% (diagnostic)");
        };
        emit("inverse.", check_inverse_inequalities(ptrs(uniform), config.p_t, config.p_s), true);
        emit("projection.", check_projection_bounds(ptrs(uniform), config.p_t, config.p_s, phi, 8, config.seed),
             true);
        emit("deformed.inverse.", check_inverse_inequalities(ptrs(deformed), config.p_t, config.p_s), false);
        emit("deformed.projection.",
             check_projection_bounds(ptrs(deformed), config.p_t, config.p_s, phi, 8, config.seed), false);
    }

    // Polynomial reproduction on an undeformed 2 x 2 mesh with 2 slabs.
    {
        const auto m = manufactured(config.p_t, config.p_s, config.epsilon, BetaChoice::rotating, config.seed);
        const auto rep = check_reproduction(m.problem, case_sequence(m.problem, MeshFamily::uniform, 2, 2), params);
        add("reproduction.relative_error", sci(rep.relative));
        verdict("reproduction", rep.pass);
    }

    // Causality on the coarsest mesh of the case, first three slabs.
    {
        const int slabs = std::min(3, config.slabs(0));
        if (slabs >= 2) {
            const auto seq = case_sequence(problem, config.mesh_family(), config.cells(0), config.slabs(0));
            MeshSequence head = seq;
            head.count = slabs;
            const auto c = check_causality(problem, head, params, slabs - 1);
            add("causality.max_relative_change", sci(c.max_relative_change));
            add("causality.perturbed_change", sci(c.perturbed_change));
            verdict("causality", c.pass);
        }
    }

    // Discrete inf-sup probe (diagnostic).
    {
        const auto ip = probe_inf_sup(mesh, problem, params, 10, config.seed);
        add("inf_sup.dofs", std::to_string(ip.dofs));
        add("inf_sup.constant", sci(ip.inf_sup));
        add("inf_sup.y_ratio_min", sci(ip.worst_y_ratio));
        add("inf_sup.y_stability_max", sci(ip.max_y_stability));
        verdict("inf_sup.positive", ip.inf_sup > 0.0);
    }
    add("overall", r.pass ? "PASS" : "FAIL");
    return r;
}

void print_report(std::ostream& out, const VerifyReport& report)
{
    for (const auto& [k, v] : report.lines)
        out << k << ": " << v << "\n";
}

} // namespace sthdg
