#include "sthdg/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include <Eigen/SparseLU>
#ifdef STHDG_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "sthdg/errors.hpp"

namespace sthdg {

CsrMatrix CsrMatrix::from_triplets(int n, const std::vector<Triplet>& triplets)
{
    if (n < 1)
        throw DomainError("CsrMatrix: dimension must be positive");
    CsrMatrix a;
    a.n = n;
    a.row_ptr.assign(n + 1, 0);
    for (const auto& t : triplets) {
        if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n)
            throw ContractError("CsrMatrix: triplet index out of range");
        ++a.row_ptr[t.row() + 1];
    }
    for (int i = 0; i < n; ++i)
        a.row_ptr[i + 1] += a.row_ptr[i];
    std::vector<int> fill(a.row_ptr.begin(), a.row_ptr.end() - 1);
    std::vector<int> col(triplets.size());
    std::vector<double> val(triplets.size());
    for (const auto& t : triplets) {
        const int k = fill[t.row()]++;
        col[k] = t.col();
        val[k] = t.value();
    }
    // Sort each row and merge duplicates, keeping insertion order for sums.
    std::vector<int> new_ptr(n + 1, 0);
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < n; ++i) {
        row.clear();
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            row.emplace_back(col[k], val[k]);
        std::stable_sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (!a.col.empty() && static_cast<int>(a.col.size()) > new_ptr[i] && a.col.back() == row[k].first)
                a.val.back() += row[k].second;
            else {
                a.col.push_back(row[k].first);
                a.val.push_back(row[k].second);
            }
        }
        new_ptr[i + 1] = static_cast<int>(a.col.size());
    }
    a.row_ptr = std::move(new_ptr);
    return a;
}

CsrMatrix CsrMatrix::from_dense(const Matrix& d, double drop)
{
    std::vector<Triplet> t;
    for (int i = 0; i < d.rows(); ++i)
        for (int j = 0; j < d.cols(); ++j)
            if (std::abs(d(i, j)) > drop || i == j)
                t.emplace_back(i, j, d(i, j));
    return from_triplets(static_cast<int>(d.rows()), t);
}

Vector CsrMatrix::multiply(const Vector& x) const
{
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            s += val[k] * x[col[k]];
        y[i] = s;
    }
    return y;
}

Eigen::SparseMatrix<double, Eigen::ColMajor> CsrMatrix::to_eigen() const
{
    Eigen::SparseMatrix<double, Eigen::RowMajor> r(n, n);
    r.reserve(nnz());
    std::vector<Triplet> t;
    t.reserve(col.size());
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            t.emplace_back(i, col[k], val[k]);
    r.setFromTriplets(t.begin(), t.end());
    Eigen::SparseMatrix<double, Eigen::ColMajor> c = r;
    c.makeCompressed();
    return c;
}

Matrix CsrMatrix::to_dense() const
{
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            d(i, col[k]) += val[k];
    return d;
}

bool CsrMatrix::valid() const
{
    if (n < 1 || static_cast<int>(row_ptr.size()) != n + 1 || row_ptr[0] != 0)
        return false;
    if (row_ptr[n] != nnz() || val.size() != col.size())
        return false;
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            if (col[k] < 0 || col[k] >= n)
                return false;
            if (k > row_ptr[i] && col[k] <= col[k - 1])
                return false;
        }
    return true;
}

double relative_residual(const CsrMatrix& a, const Vector& x, const Vector& b)
{
    const double nb = b.norm();
    const double nr = (a.multiply(x) - b).norm();
    return nb > 0.0 ? nr / nb : nr;
}

struct DirectSolver::Impl {
#ifdef STHDG_HAVE_UMFPACK
    Eigen::UmfPackLU<Eigen::SparseMatrix<double, Eigen::ColMajor>> lu;
#else
    Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor>, Eigen::COLAMDOrdering<int>> lu;
#endif
    std::vector<int> pattern_ptr, pattern_col;
    const CsrMatrix* matrix = nullptr;
    CsrMatrix copy;
    Eigen::SparseMatrix<double, Eigen::ColMajor> eigen; // referenced by the factorization
    bool analyzed = false;
};

DirectSolver::DirectSolver() : impl_(std::make_unique<Impl>()) {}
DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

namespace {

long trailing_integer(const std::string& s)
{
    static const std::regex re("(\\d+)\\s*$");
    std::smatch m;
    if (std::regex_search(s, m, re))
        return std::stol(m[1]);
    return -1;
}

} // namespace

void DirectSolver::factorize(const CsrMatrix& a)
{
    if (!a.valid())
        throw ContractError("direct solve: invalid CSR matrix");
    auto& im = *impl_;
    im.copy = a;
    im.eigen = a.to_eigen();
    im.eigen.makeCompressed();
    const auto& m = im.eigen;
    const bool same = im.analyzed && im.pattern_ptr == a.row_ptr && im.pattern_col == a.col;
    if (!same) {
        im.lu.analyzePattern(m);
        im.pattern_ptr = a.row_ptr;
        im.pattern_col = a.col;
        im.analyzed = true;
    }
    im.lu.factorize(m);
    if (im.lu.info() != Eigen::Success) {
#ifdef STHDG_HAVE_UMFPACK
        const std::string msg = "UMFPACK reports a singular or ill-posed matrix";
#else
        const std::string msg = im.lu.lastErrorMessage();
#endif
        im.analyzed = false;
        throw SolverError("sparse LU breakdown: " + msg, trailing_integer(msg));
    }
}

Vector DirectSolver::solve(const Vector& b) const
{
    const auto& im = *impl_;
    if (b.size() != im.copy.n)
        throw ContractError("direct solve: right-hand side has the wrong length");
    Vector x = im.lu.solve(b);
    if (!x.allFinite())
        throw SolverError("sparse LU produced a non-finite solution");
    double res = relative_residual(im.copy, x, b);
    if (res >= 1e-10) {
        const Vector r = b - im.copy.multiply(x);
        x += im.lu.solve(r);
        res = relative_residual(im.copy, x, b);
    }
    if (!(res < 1e-10))
        throw SolverError("sparse LU residual check failed", -1, res);
    return x;
}

Vector direct_solve(const CsrMatrix& a, const Vector& b)
{
    DirectSolver s;
    s.factorize(a);
    return s.solve(b);
}

Preconditioner parse_preconditioner(const std::string& name)
{
    if (name == "none")
        return Preconditioner::none;
    if (name == "ilu0")
        return Preconditioner::ilu0;
    throw ConfigurationError("unknown preconditioner '" + name + "'");
}

namespace {

// ILU(0) on the CSR pattern; L has unit diagonal, both stored in one array.
struct Ilu0 {
    const CsrMatrix* a = nullptr;
    std::vector<double> lu;
    std::vector<int> diag;

    explicit Ilu0(const CsrMatrix& m) : a(&m), lu(m.val), diag(m.n, -1)
    {
        const int n = m.n;
        for (int i = 0; i < n; ++i)
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                if (m.col[k] == i)
                    diag[i] = k;
        for (int i = 0; i < n; ++i)
            if (diag[i] < 0)
                throw SolverError("ILU0: missing diagonal entry", i);
        std::vector<int> pos(n, -1);
        for (int i = 0; i < n; ++i) {
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                pos[m.col[k]] = k;
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
                const int j = m.col[k];
                if (j >= i)
                    break;
                const double piv = lu[diag[j]];
                if (piv == 0.0)
                    throw SolverError("ILU0: zero pivot", j);
                lu[k] /= piv;
                const double lij = lu[k];
                for (int q = diag[j] + 1; q < m.row_ptr[j + 1]; ++q) {
                    const int p = pos[m.col[q]];
                    if (p >= 0)
                        lu[p] -= lij * lu[q];
                }
            }
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                pos[m.col[k]] = -1;
            if (lu[diag[i]] == 0.0)
                throw SolverError("ILU0: zero pivot", i);
        }
    }

    void apply(const Vector& r, Vector& z) const
    {
        const auto& m = *a;
        z = r;
        for (int i = 0; i < m.n; ++i)
            for (int k = m.row_ptr[i]; k < diag[i]; ++k)
                z[i] -= lu[k] * z[m.col[k]];
        for (int i = m.n - 1; i >= 0; --i) {
            for (int k = diag[i] + 1; k < m.row_ptr[i + 1]; ++k)
                z[i] -= lu[k] * z[m.col[k]];
            z[i] /= lu[diag[i]];
        }
    }
};

} // namespace

GmresResult gmres_solve(const CsrMatrix& a, const Vector& b, int restart, double tol, int maxit,
                        Preconditioner preconditioner, const Vector* x0)
{
    if (!a.valid())
        throw ContractError("gmres: invalid CSR matrix");
    if (b.size() != a.n)
        throw ContractError("gmres: right-hand side has the wrong length");
    if (restart < 1 || maxit < 1 || !(tol > 0.0))
        throw ConfigurationError("gmres: restart, maxit and tol must be positive");

    std::unique_ptr<Ilu0> ilu;
    if (preconditioner == Preconditioner::ilu0)
        ilu = std::make_unique<Ilu0>(a);
    auto precond = [&](const Vector& v, Vector& z) {
        if (ilu)
            ilu->apply(v, z);
        else
            z = v;
    };

    GmresResult res;
    res.x = x0 ? *x0 : Vector::Zero(a.n);
    const double nb = b.norm();
    if (nb == 0.0) {
        res.x.setZero();
        return res;
    }
    const int m = restart;
    Matrix v(a.n, m + 1);
    Matrix h = Matrix::Zero(m + 1, m);
    Vector cs(m), sn(m), g(m + 1), z;
    int it = 0;
    double rel = (b - a.multiply(res.x)).norm() / nb;
    while (it < maxit) {
        const Vector r = b - a.multiply(res.x);
        const double beta = r.norm();
        rel = beta / nb;
        if (rel <= tol)
            break;
        v.col(0) = r / beta;
        g.setZero();
        g[0] = beta;
        h.setZero();
        int k = 0;
        for (; k < m && it < maxit; ++k) {
            ++it;
            precond(v.col(k), z);
            Vector w = a.multiply(z);
            for (int j = 0; j <= k; ++j) {
                h(j, k) = w.dot(v.col(j));
                w -= h(j, k) * v.col(j);
            }
            h(k + 1, k) = w.norm();
            if (h(k + 1, k) > 0.0)
                v.col(k + 1) = w / h(k + 1, k);
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * h(j, k) + sn[j] * h(j + 1, k);
                h(j + 1, k) = -sn[j] * h(j, k) + cs[j] * h(j + 1, k);
                h(j, k) = t;
            }
            const double d = std::hypot(h(k, k), h(k + 1, k));
            cs[k] = d > 0.0 ? h(k, k) / d : 1.0;
            sn[k] = d > 0.0 ? h(k + 1, k) / d : 0.0;
            h(k, k) = d;
            h(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) / nb <= tol || h(k, k) == 0.0) {
                ++k;
                break;
            }
        }
        // Solve the small triangular system and update x = x + M^{-1} V y.
        Vector y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        const Vector dx = v.leftCols(k) * y;
        precond(dx, z);
        res.x += z;
        rel = (b - a.multiply(res.x)).norm() / nb;
        if (rel <= tol)
            break;
    }
    res.iterations = it;
    res.residual = rel;
    if (!(rel <= tol))
        throw SolverError("GMRES did not converge", -1, rel);
    return res;
}

void write_matrix_market(const std::string& path, const CsrMatrix& a)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path);
    out.precision(17);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n << ' ' << a.n << ' ' << a.nnz() << '\n';
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            out << i + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
}

} // namespace sthdg
