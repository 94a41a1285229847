#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sthdg/mesh.hpp"
#include "sthdg/problem.hpp"
#include "sthdg/solution.hpp"
#include "sthdg/sparse.hpp"

namespace sthdg {

inline double default_alpha(int p_s) { return p_s > 0 ? 8.0 * p_s * p_s : 8.0; }

struct HdgParams {
    int p_t = 1;
    int p_s = 1;
    double alpha = 8.0;
    int threads = 1;
};

/// Inflow values u^- at a lattice spatial point of the slab bottom.
using InflowFunction = std::function<double(double lx, double ly)>;

/// Element blocks; rows are test functions.
struct LocalBlocks {
    Matrix Auu, Aul, Alu, All;
    Vector bu, bl;
    std::vector<int> dofs; // global trace dof per local trace index
};

LocalBlocks local_forms(const SpaceTimeMesh& mesh, int element, const TraceLayout& layout,
                        const ProblemSpec& problem, const HdgParams& params, const std::vector<double>& beta_s,
                        const InflowFunction* inflow = nullptr);

/// Static condensation of one element.
struct Condensed {
    Matrix S;
    Vector rhs;
    Eigen::PartialPivLU<Matrix> lu; // of A_uu
    Matrix Aul;
    Vector bu;
};

/// Throws SolverError naming the element when A_uu is singular.
Condensed condense(const LocalBlocks& blocks, long element = -1);

struct SlabSystem {
    CsrMatrix S;
    Vector rhs;
    TraceLayout layout;
    std::vector<LocalBlocks> blocks;
    std::vector<Condensed> condensed;
};

SlabSystem assemble_slab(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                         const InflowFunction* inflow = nullptr);

/// u_K = A_uu^{-1} (b_u - A_ul lambda_K).
std::vector<Vector> recover_element_solution(const SlabSystem& system, const Vector& lambda);

/// ||r|| / ||b|| of the uncondensed slab system at (u, lambda).
double uncondensed_residual(const SlabSystem& system, const std::vector<Vector>& u, const Vector& lambda);

/// Uncondensed operator over [u (element-major), lambda], rows are test functions.
struct GlobalSystem {
    CsrMatrix A;
    Vector b;
    int num_u = 0;
    int num_lambda = 0;
    TraceLayout layout;
};

GlobalSystem assemble_global(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                             const InflowFunction* inflow = nullptr);

enum class SolverKind { direct, gmres };

SolverKind parse_solver(const std::string& name);

struct SolverOptions {
    SolverKind kind = SolverKind::direct;
    int restart = 30;
    double tol = 1e-12;
    int maxit = 5000;
    Preconditioner preconditioner = Preconditioner::ilu0;
};

struct SlabStats {
    int trace_dofs = 0;
    long elements = 0;
    double residual = 0.0; // uncondensed relative residual
    int iterations = 0;    // GMRES iterations, 0 for the direct solver
};

/// Solves the condensed system, recovers the element unknowns and checks the
/// uncondensed residual.
SlabSolution solve_slab(std::shared_ptr<const SpaceTimeMesh> mesh, const ProblemSpec& problem,
                        const HdgParams& params, const SolverOptions& solver, const InflowFunction* inflow,
                        SlabStats* stats = nullptr, DirectSolver* reuse = nullptr);

/// Slab n of a time-ordered sequence, built against the previous slab's top.
struct MeshSequence {
    int count = 0;
    std::function<SpaceTimeMesh(int n, const InterfaceLayout* lower)> build;
};

struct MarchResult {
    Solution solution;
    std::vector<SlabStats> stats;
};

/// Sequential slab solves; slab 0 takes its initial data from g on Omega(0).
MarchResult march(const ProblemSpec& problem, const MeshSequence& meshes, const HdgParams& params,
                  const SolverOptions& solver = {},
                  const std::function<void(int, const SlabSolution&)>& on_slab = {});

/// Number of worker threads from STHDG_THREADS (default 1).
int threads_from_env();

} // namespace sthdg
