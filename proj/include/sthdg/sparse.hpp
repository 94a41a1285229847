#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "sthdg/types.hpp"

namespace sthdg {

using Triplet = Eigen::Triplet<double>;

/// Square compressed-row matrix with sorted, duplicate-free columns per row.
struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<double> val;

    /// Sums duplicate entries.
    static CsrMatrix from_triplets(int n, const std::vector<Triplet>& triplets);
    static CsrMatrix from_dense(const Matrix& a, double drop = 0.0);

    int nnz() const { return static_cast<int>(col.size()); }
    Vector multiply(const Vector& x) const;
    Eigen::SparseMatrix<double, Eigen::ColMajor> to_eigen() const;
    Matrix to_dense() const;
    /// Sorted, duplicate-free, in-range columns and n >= 1.
    bool valid() const;
};

double relative_residual(const CsrMatrix& a, const Vector& x, const Vector& b);

/// Sparse LU that reuses the symbolic analysis while the pattern is unchanged.
class DirectSolver {
public:
    DirectSolver();
    ~DirectSolver();
    DirectSolver(DirectSolver&&) noexcept;
    DirectSolver& operator=(DirectSolver&&) noexcept;

    void factorize(const CsrMatrix& a);
    /// Verifies ||Ax - b|| / ||b|| < 1e-10, refining once if needed.
    Vector solve(const Vector& b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Vector direct_solve(const CsrMatrix& a, const Vector& b);

enum class Preconditioner { none, ilu0 };

Preconditioner parse_preconditioner(const std::string& name);

struct GmresResult {
    Vector x;
    int iterations = 0;
    double residual = 0.0; // final relative residual
};

/// Restarted GMRES with right preconditioning; throws SolverError without convergence.
GmresResult gmres_solve(const CsrMatrix& a, const Vector& b, int restart, double tol, int maxit,
                        Preconditioner preconditioner, const Vector* x0 = nullptr);

void write_matrix_market(const std::string& path, const CsrMatrix& a);

} // namespace sthdg
