#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sthdg/cases.hpp"
#include "sthdg/hdg.hpp"
#include "sthdg/norms.hpp"

namespace sthdg {

/// Run settings; read from a flat key = value file plus overrides.
struct RunConfig {
    std::string case_name = "pulse";
    double epsilon = 1e-8;
    int p_t = 1;
    int p_s = 1;
    int cycles = 3;
    double h = 0.1;
    double dt = 0.1;
    std::string family; // empty: the case default
    double alpha = 0.0; // <= 0: 8 p_s^2
    std::string solver = "direct";
    int gmres_restart = 30;
    double gmres_tol = 1e-12;
    int gmres_maxit = 5000;
    std::string preconditioner = "ilu0";
    std::string beta = "rotating"; // manufactured case only
    double amplitude = -1.0;       // < 0: the case default
    std::string output_dir = ".";
    std::string output;            // CSV path, empty for stdout
    unsigned seed = 7;
    int threads = 0;               // 0: from STHDG_THREADS
    bool table_display = false;    // 2 significant digits
    bool vtk = true;
    double chi = 0.0;              // <= 0: 10 T
    int samples = 50;

    MeshFamily mesh_family() const;
    double penalty() const { return alpha > 0.0 ? alpha : default_alpha(p_s); }
    HdgParams hdg_params() const;
    SolverOptions solver_options() const;
    CaseDescriptor make_case() const;
    int cells(int cycle) const; // per direction
    int slabs(int cycle) const;
};

/// Throws ConfigurationError on invalid values (cycles < 1, h or dt <= 0, dt > h, ...).
void validate(const RunConfig& config);

/// Sets one key; "p" sets both degrees. Throws ConfigurationError on unknown keys.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_settings(std::istream& in);
RunConfig load_config(const std::string& path);

/// Per cycle summary of a convergence study.
struct ConvergenceRow {
    long cells_per_slab = 0;
    int num_slabs = 0;
    double error_ss = 0.0;
    double error_s = 0.0;
    double error_v = 0.0;
    bool has_rate = false;
    bool saturated = false;
    double rate = 0.0;
    NormBreakdown breakdown;
    double max_residual = 0.0;
};

/// Errors below this are reported with a saturated rate.
constexpr double kSaturatedError = 1e-9;

std::vector<ConvergenceRow> run_convergence(const RunConfig& config, std::ostream* log = nullptr);

/// cells_per_slab,num_slabs,error_ss,rate followed by a breakdown section.
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows, bool table_display);

/// ||u_h - u||_{Omega(T)} over the top facets of the last slab.
double final_time_l2_error(const Solution& solution, const ProblemSpec& problem);

struct SolveSummary {
    long cells_per_slab = 0;
    int num_slabs = 0;
    double max_residual = 0.0;
    bool has_exact = false;
    double final_l2_error = 0.0;
    double error_ss = 0.0;
    std::vector<std::string> files;
};

/// March on cycle 0 of the config, writing VTK per slab when asked and summary.txt.
SolveSummary run_solve(const RunConfig& config, std::ostream* log = nullptr);

/// Corner samples of u_h per element (8 per element) for write_vtk.
std::vector<double> corner_values(const SlabSolution& slab);

/// Structured "key: value" report of the stability checks.
struct VerifyReport {
    std::vector<std::pair<std::string, std::string>> lines;
    bool pass = true;
};

VerifyReport run_verify(const RunConfig& config);

void print_report(std::ostream& out, const VerifyReport& report);

} // namespace sthdg
