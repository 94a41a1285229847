#pragma once

#include <array>
#include <string>
#include <vector>

#include "sthdg/hdg.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/problem.hpp"

namespace sthdg {

enum class MeshFamily { uniform, ring };

MeshFamily parse_mesh_family(const std::string& name);
const char* to_string(MeshFamily family);

struct CaseDescriptor {
    std::string name;
    ProblemSpec problem;
    MeshFamily family = MeshFamily::uniform;
    int recommended_cycles = 3;
};

/// |sqrt(x1^2 + x2^2) - 0.2| < 0.1 at a uniform-coordinate cell centre.
bool ring_predicate(const Vec2& center);

/// Root-layer elements of a mesh whose uniform-coordinate spatial centre lies in the ring.
std::vector<int> ring_marks(const SpaceTimeMesh& mesh);

/// Rotating Gaussian pulse on the deformed unit square, f = 0, all-Neumann lateral boundary.
CaseDescriptor rotating_pulse(double epsilon, MeshFamily family = MeshFamily::ring);

enum class BetaChoice { zero, constant, rotating };

BetaChoice parse_beta_choice(const std::string& name);

/// u = sum c_k t^a x1^b x2^c with the listed (a, b, c) exponents.
struct PolynomialField {
    std::vector<std::array<int, 3>> exponents;
    std::vector<double> coefficients;

    double value(double t, const Vec2& x) const;
    Vec3 gradient(double t, const Vec2& x) const; // (u_t, u_x1, u_x2)
    double laplacian(double t, const Vec2& x) const;
};

/// Full Q_{(p_t,p_s)} tensor polynomial with deterministic coefficients.
PolynomialField tensor_polynomial(int p_t, int p_s, unsigned seed = 7);

/// Manufactured case on the undeformed square; f and g derived analytically.
CaseDescriptor manufactured(const PolynomialField& u, double epsilon, BetaChoice beta,
                            const BoundaryPartition& partition = {});
CaseDescriptor manufactured(int p_t, int p_s, double epsilon, BetaChoice beta, unsigned seed = 7);

/// Zero data on the rotating-pulse geometry; exact solution 0.
CaseDescriptor zero_case(double epsilon);

/// Case registry: "pulse", "manufactured", "zero".
CaseDescriptor make_case(const std::string& name, double epsilon, int p_t, int p_s,
                         BetaChoice beta = BetaChoice::rotating, unsigned seed = 7);

std::vector<std::string> case_names();

/// Slab n of an n_cells x n_cells root grid with dt = T / n_slabs, ring-refined when asked.
SpaceTimeMesh case_slab(const ProblemSpec& problem, MeshFamily family, int n_cells, int n_slabs, int n,
                        const InterfaceLayout* lower = nullptr);

/// All slabs of case_slab over [0, T].
MeshSequence case_sequence(const ProblemSpec& problem, MeshFamily family, int n_cells, int n_slabs);
/// Same with as many slabs as cells per direction.
MeshSequence case_sequence(const ProblemSpec& problem, MeshFamily family, int n_cells);

} // namespace sthdg
