// Batch driver: convergence studies, verification suite, solves and mesh info.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "sthdg/errors.hpp"
#include "sthdg/stability.hpp"
#include "sthdg/study.hpp"

using namespace sthdg;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> settings;
    std::map<std::string, std::string> shortcuts;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("-c,--config", c.config_path, "flat key = value config file");
    app->add_option("-s,--set", c.settings, "override, key=value (repeatable)");
    for (const char* key : {"case", "epsilon", "p", "p_t", "p_s", "cycles", "dt", "family", "alpha",
                            "solver", "output", "output_dir", "seed", "chi", "samples", "threads"})
        app->add_option(std::string("--") + key, c.shortcuts[key], std::string("setting '") + key + "'");
    // -h is help, so the mesh size gets a longer name.
    app->add_option("--mesh-size", c.shortcuts["h"], "setting 'h'");
}

RunConfig resolve(const Common& c)
{
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    for (const auto& [k, v] : c.shortcuts)
        if (!v.empty())
            apply_setting(cfg, k, v);
    for (const auto& s : c.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigurationError("override '" + s + "' is not key=value");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
}

int cmd_convergence(const RunConfig& cfg)
{
    const auto rows = run_convergence(cfg, &std::cerr);
    if (cfg.output.empty()) {
        write_convergence_csv(std::cout, rows, cfg.table_display);
    } else {
        std::ofstream out(cfg.output);
        if (!out)
            throw ConfigurationError("cannot write '" + cfg.output + "'");
        write_convergence_csv(out, rows, cfg.table_display);
        std::cerr << "wrote " << cfg.output << "\n";
    }
    return 0;
}

int cmd_verify(const RunConfig& cfg)
{
    const auto report = run_verify(cfg);
    print_report(std::cout, report);
    return report.pass ? 0 : 1;
}

int cmd_solve(const RunConfig& cfg)
{
    const auto s = run_solve(cfg, &std::cerr);
    std::printf("cells_per_slab: %ld\nnum_slabs: %d\nmax_uncondensed_residual: %.16e\n", s.cells_per_slab,
                s.num_slabs, s.max_residual);
    if (s.has_exact)
        std::printf("final_time_l2_error: %.16e\nerror_ss: %.16e\n", s.final_l2_error, s.error_ss);
    for (const auto& f : s.files)
        std::printf("file: %s\n", f.c_str());
    return 0;
}

int cmd_mesh_info(const RunConfig& cfg, int slab, const std::string& vtk)
{
    const auto cs = cfg.make_case();
    const int slabs = cfg.slabs(0);
    if (slab < 0 || slab >= slabs)
        throw ConfigurationError("slab index out of range");
    // Build the preceding slabs so the inflow facets match their tops.
    SpaceTimeMesh mesh;
    InterfaceLayout lower;
    for (int n = 0; n <= slab; ++n) {
        mesh = case_slab(cs.problem, cfg.mesh_family(), cfg.cells(0), slabs, n, n == 0 ? nullptr : &lower);
        lower = mesh.top_layout();
    }
    std::map<std::string, int> counts;
    int hanging = 0;
    for (const auto& f : mesh.facets) {
        counts[std::string(f.kind == FacetKind::Q ? "Q." : "R.") + to_string(f.tag)]++;
        hanging += f.coarse_slot >= 0;
    }
    const auto d = validate(mesh);
    std::printf("slab: %d\ninterval: %.16e %.16e\nelements: %zu\nfacets: %zu\nhanging_facets: %d\n", slab,
                mesh.t_begin(), mesh.t_end(), mesh.elements.size(), mesh.facets.size(), hanging);
    for (const auto& [k, v] : counts)
        std::printf("facets.%s: %d\n", k.c_str(), v);
    std::printf("det_j: %.6e %.6e\nsurface_factor: %.6e %.6e\nmax_level_jump: %d\nmax_dt_over_h: %.6e\n"
                "max_slab_ratio: %.6e\nviolations: %zu\n",
                d.min_det_j, d.max_det_j, d.min_surface, d.max_surface, d.max_level_jump, d.max_dt_over_h,
                d.max_slab_ratio, d.violations.size());
    std::map<std::string, int> kinds;
    for (const auto& v : d.violations)
        kinds[v.kind]++;
    for (const auto& [k, v] : kinds)
        std::printf("violations.%s: %d\n", k.c_str(), v);
    std::printf("c_star: %.6e\n", estimate_trace_constant(mesh, cfg.p_t, cfg.p_s));
    if (!vtk.empty()) {
        write_vtk(vtk, mesh);
        std::printf("file: %s\n", vtk.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Space-time HDG solver for advection-diffusion on deforming domains"};
    app.require_subcommand(1);
    Common conv, ver, sol, info;
    add_common(app.add_subcommand("convergence", "convergence study, CSV on stdout or --output"), conv);
    auto* conv_cmd = app.get_subcommand("convergence");
    bool table = false;
    conv_cmd->add_flag("--table-display", table, "two significant digits for display");
    add_common(app.add_subcommand("verify", "stability checks; exit status 1 on any FAIL"), ver);
    add_common(app.add_subcommand("solve", "march one mesh, VTK per slab plus summary.txt"), sol);
    auto* solve_cmd = app.get_subcommand("solve");
    bool no_vtk = false;
    solve_cmd->add_flag("--no-vtk", no_vtk, "skip the VTK files");
    add_common(app.add_subcommand("mesh-info", "slab mesh statistics and validation"), info);
    auto* info_cmd = app.get_subcommand("mesh-info");
    int slab = 0;
    std::string vtk;
    info_cmd->add_option("--slab", slab, "slab index");
    info_cmd->add_option("--vtk", vtk, "write the slab mesh to this VTK file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (conv_cmd->parsed()) {
            auto cfg = resolve(conv);
            cfg.table_display = cfg.table_display || table;
            return cmd_convergence(cfg);
        }
        if (app.get_subcommand("verify")->parsed())
            return cmd_verify(resolve(ver));
        if (solve_cmd->parsed()) {
            auto cfg = resolve(sol);
            cfg.vtk = cfg.vtk && !no_vtk;
            return cmd_solve(cfg);
        }
        if (info_cmd->parsed())
            return cmd_mesh_info(resolve(info), slab, vtk);
    } catch (const ConfigurationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
