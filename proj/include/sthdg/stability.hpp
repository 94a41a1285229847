#pragma once

#include <string>
#include <vector>

#include "sthdg/hdg.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/norms.hpp"
#include "sthdg/problem.hpp"

namespace sthdg {

/// phi(t) = eT exp(-t/T) + chi for T >= 1, e exp(-t) + chi for T < 1.
struct WeightFunction {
    double final_time = 1.0;
    double chi = 1.0;

    double operator()(double t) const;
    double derivative(double t) const;
};

double weight_phi(double t, double final_time, double chi);

/// (e - sqrt 2) T / (sqrt 2 - 1).
double chi_threshold(double final_time);
/// 1 + 4 c_star^2.
double alpha_threshold(double c_star);

struct ConstantEstimates {
    double c_star = 0.0;
    double chi_threshold = 0.0;
    double alpha_threshold = 0.0;
};

/// max_K sup_v ||v||_{Q_K} / (h_K^{-1/2} ||v||_K) from a generalized eigenproblem per element.
double estimate_trace_constant(const SpaceTimeMesh& mesh, int p_t, int p_s);

ConstantEstimates estimate_constants(const SpaceTimeMesh& mesh, int p_t, int p_s, double final_time);

/// Element L2 projection of phi w and facet L2 projection of phi kappa.
Vector weighted_projection(const SpaceTimeMesh& mesh, const TraceLayout& layout, const WeightFunction& phi,
                           const Vector& w);

struct CoercivityReport {
    std::vector<double> ratios; // a_h(w, Pi(phi w)) / |||w|||_v^2 per sample
    double worst_ratio = 0.0;
    ConstantEstimates constants;
    double alpha = 0.0;
    double chi = 0.0;
    bool alpha_below_threshold = false; // advisory
    bool pass = false;                  // every ratio >= 1/4
};

/// Samples w_h with i.i.d. standard-normal coefficients over the whole mesh.
///
/// Throws ConfigurationError if chi is not above its threshold or alpha <= 1.
CoercivityReport check_weighted_coercivity(const SpaceTimeMesh& mesh, const ProblemSpec& problem, int p_t,
                                           int p_s, double alpha, double chi, int samples, unsigned seed);

/// Empirical constants of the inverse and trace inequalities on one mesh.
struct InverseConstants {
    double time_derivative = 0.0; // ||d_t v|| <= C (1/dt + 1/h) ||v||
    double spatial_gradient = 0.0; // ||grad_x v|| <= C h^{-1} ||v||
    double trace_q = 0.0;          // c_star
    double trace_boundary = 0.0;   // ||v||_{dK} <= C (dt^{-1/2} + h^{-1/2}) ||v||
    double facet_time_derivative = 0.0; // ||d_t mu||_F <= C (1/dt + 1/h) ||mu||_F on Q facets
};

InverseConstants inverse_constants(const SpaceTimeMesh& mesh, int p_t, int p_s);

/// Projection constants on one mesh.
struct ProjectionConstants {
    double spatial_grad = 0.0;     // ||grad_x (u - Pi u)|| / ||grad_x u||
    double time_derivative = 0.0;  // ||d_t (u - Pi u)|| / (||d_t u|| + ||grad_x u||)
    double elem_facet_q = 0.0;     // ||Pi u - Pi^F u||_Q / (h^{1/2} ||grad_x u||)
    double weighted[5] = {0, 0, 0, 0, 0}; // (I - Pi)(phi w) bounds, see weighted_names
};

extern const char* const weighted_names[5];

/// Smooth fields are random trigonometric functions of element-normalized
/// coordinates; the weighted bounds are sup over V_h from eigenproblems.
ProjectionConstants projection_constants(const SpaceTimeMesh& mesh, int p_t, int p_s, const WeightFunction& phi,
                                         int samples, unsigned seed);

/// One empirical constant tracked across refinement levels.
struct ConstantDrift {
    std::string name;
    std::vector<double> values;
    double drift = 0.0; // (max - min) / min
    bool pass = false;
};

ConstantDrift make_drift(const std::string& name, const std::vector<double>& values, double tolerance);

struct DriftReport {
    std::vector<ConstantDrift> constants;
    bool pass = false;
};

DriftReport check_inverse_inequalities(const std::vector<const SpaceTimeMesh*>& levels, int p_t, int p_s,
                                       double tolerance = 0.1);

DriftReport check_projection_bounds(const std::vector<const SpaceTimeMesh*>& levels, int p_t, int p_s,
                                    const WeightFunction& phi, int samples, unsigned seed,
                                    double tolerance = 0.1);

struct ReproductionReport {
    double error_ss = 0.0;
    double norm_ss = 0.0;
    double relative = 0.0;
    bool pass = false;
};

/// Relative |||u - u_h|||_ss against 1e-9 on the given slab sequence.
ReproductionReport check_reproduction(const ProblemSpec& problem, const MeshSequence& meshes,
                                      const HdgParams& params, double tolerance = 1e-9);

struct CausalityReport {
    int perturbed_slab = 0;
    double max_relative_change = 0.0; // over slabs before the perturbed one
    double perturbed_change = 0.0;    // relative change in the perturbed slab itself
    bool pass = false;
};

/// Adds a bump to f inside slab `perturbed` and compares the earlier slabs.
CausalityReport check_causality(const ProblemSpec& problem, const MeshSequence& meshes, const HdgParams& params,
                                int perturbed, double tolerance = 1e-12);

/// Test function (Pi_h(tau_eps d_t w), theta) with theta chosen per facet class.
Vector time_derivative_test_function(const SpaceTimeMesh& mesh, const TraceLayout& layout, double epsilon,
                                     const Vector& w);

struct InfSupReport {
    int dofs = 0;
    double inf_sup = 0.0;             // min_w sup_v a(w,v) / (|||w|||_ss |||v|||_s)
    double worst_y_ratio = 0.0;       // min_w a(w, y(w)) / |||w|||_s^2 over samples
    double max_y_stability = 0.0;     // max_w |||y(w)|||_s / |||w|||_s
};

/// Dense probe; throws ConfigurationError above max_dofs.
InfSupReport probe_inf_sup(const SpaceTimeMesh& mesh, const ProblemSpec& problem, const HdgParams& params,
                           int samples, unsigned seed, int max_dofs = 2000);

/// n x n root cells with `layers` equal root layers over [0, T].
SpaceTimeMesh layered_mesh(const ProblemSpec& problem, int n, int layers);

/// Levels n0, 2 n0, 4 n0 over the same window [0, dt0] with the given deformation amplitude.
std::vector<SpaceTimeMesh> window_levels(const ProblemSpec& problem, int n0, double dt0, double amplitude);

} // namespace sthdg
