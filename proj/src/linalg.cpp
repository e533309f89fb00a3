#include "dgms/linalg.hpp"

#include "dgms/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace dgms {

BlockJacobi::BlockJacobi(const SparseMatrix& K, std::vector<int> starts)
    : starts_(std::move(starts))
{
    const int nblocks = static_cast<int>(starts_.size()) - 1;
    inverses_.resize(std::max(nblocks, 0));
    for (int b = 0; b < nblocks; ++b)
    {
        const int lo = starts_[b];
        const int n = starts_[b + 1] - lo;
        Matrix    block = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (SparseMatrix::InnerIterator it(K, lo + i); it; ++it)
            {
                const int j = static_cast<int>(it.col()) - lo;
                if (j >= 0 && j < n)
                    block(i, j) = it.value();
            }
        Eigen::LDLT<Matrix> ldlt(block);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
            throw NumericalError("block Jacobi: diagonal block " + std::to_string(b) + " not positive definite", 0.0);
        inverses_[b] = ldlt.solve(Matrix::Identity(n, n));
    }
}

BlockJacobi BlockJacobi::uniform(const SparseMatrix& K, int block_size)
{
    std::vector<int> starts;
    for (int s = 0; s <= K.rows(); s += block_size)
        starts.push_back(s);
    if (starts.back() != K.rows())
        starts.push_back(static_cast<int>(K.rows()));
    return BlockJacobi(K, std::move(starts));
}

void BlockJacobi::apply(const Vector& r, Vector& z) const
{
    if (starts_.empty())
    {
        z = r;
        return;
    }
    z.resize(r.size());
    for (std::size_t b = 0; b + 1 < starts_.size(); ++b)
    {
        const int lo = starts_[b];
        const int n = starts_[b + 1] - lo;
        z.segment(lo, n).noalias() = inverses_[b] * r.segment(lo, n);
    }
}

Vector cg_solve(const SparseMatrix& K, const Vector& b, const BlockJacobi& precond, const CgOptions& opts,
                SolveStats* stats)
{
    const double bnorm = b.norm();
    Vector       x = Vector::Zero(b.size());
    if (bnorm == 0.0)
    {
        if (stats)
            *stats = {0, 0.0};
        return x;
    }

    Vector r = b;
    Vector z, p, q;
    precond.apply(r, z);
    p = z;
    double rz = r.dot(z);
    double rel = 1.0;
    int    it = 0;
    for (; it < opts.max_iterations; ++it)
    {
        q.noalias() = K * p;
        const double pq = p.dot(q);
        if (!(pq > 0.0))
            throw NumericalError("cg: operator not positive definite", rel);
        const double step = rz / pq;
        x += step * p;
        r -= step * q;
        rel = r.norm() / bnorm;
        if (rel <= opts.rtol)
        {
            ++it;
            break;
        }
        precond.apply(r, z);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    if (rel > opts.rtol)
        throw NumericalError("cg: no convergence in " + std::to_string(opts.max_iterations) +
                                 " iterations (relative residual " + std::to_string(rel) + ")",
                             rel);
    if (stats)
        *stats = {it, rel};
    return x;
}

// [K C^T; C -delta I] is quasi-definite, so an LDL^T factorization exists for
// every symmetric ordering; refinement against the exact system removes delta.
struct SaddleSolver::Factor
{
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

SaddleSolver::SaddleSolver(SaddleSystem system, double rtol)
    : system_(std::move(system)), rtol_(rtol), factor_(std::make_unique<Factor>())
{
    const Eigen::Index n = system_.K.rows();
    const Eigen::Index m = system_.C.rows();
    if (system_.K.cols() != n || (m > 0 && system_.C.cols() != n))
        throw ConfigError("saddle system: inconsistent block dimensions");

    row_scale_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
    {
        double mx = 0.0;
        for (SparseMatrix::InnerIterator it(system_.C, i); it; ++it)
            mx = std::max(mx, std::abs(it.value()));
        if (mx == 0.0)
            throw NumericalError("saddle system: zero constraint row " + std::to_string(i), 0.0);
        row_scale_[i] = 1.0 / mx;
    }

    double kmax = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (SparseMatrix::InnerIterator it(system_.K, i); it; ++it)
            kmax = std::max(kmax, std::abs(it.value()));
    const double delta = 1e-10 * std::max(kmax, 1.0);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(system_.K.nonZeros() + 2 * system_.C.nonZeros() + m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (SparseMatrix::InnerIterator it(system_.K, i); it; ++it)
            trips.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), it.value());
    for (Eigen::Index i = 0; i < m; ++i)
        trips.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -delta);
    for (Eigen::Index i = 0; i < m; ++i)
        for (SparseMatrix::InnerIterator it(system_.C, i); it; ++it)
        {
            const double v = it.value() * row_scale_[i];
            trips.emplace_back(static_cast<int>(n + i), static_cast<int>(it.col()), v);
            trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(n + i), v);
        }
    Eigen::SparseMatrix<double> kkt(n + m, n + m);
    kkt.setFromTriplets(trips.begin(), trips.end());
    kkt.makeCompressed();

    factor_->ldlt.compute(kkt);
    if (factor_->ldlt.info() != Eigen::Success)
        throw NumericalError("saddle system factorization failed", 0.0);
    const Vector d = factor_->ldlt.vectorD();
    if (!d.allFinite() || (d.array() == 0.0).any())
        throw NumericalError("saddle system is singular (rank-deficient constraints?)", 0.0);
}

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

SaddleSolution SaddleSolver::solve(const Vector& b, const Vector& c) const
{
    const Eigen::Index n = system_.K.rows();
    const Eigen::Index m = system_.C.rows();

    Vector rhs(n + m);
    rhs.head(n) = b;
    rhs.tail(m) = c.cwiseProduct(row_scale_);

    // The residuals are measured against the scale of the data; a zero right
    // hand side returns the zero solution.
    const double scale = std::max(rhs.norm(), 1e-300);
    Vector       sol = Vector::Zero(n + m);
    Vector       res = rhs;
    double       rel = res.norm() / scale;
    int          refinements = 0;
    for (int step = 0; step < 12 && rel > rtol_; ++step)
    {
        sol += factor_->ldlt.solve(res);
        Vector x = sol.head(n);
        Vector mu = sol.tail(m);
        res.head(n) = rhs.head(n) - system_.K * x;
        if (m > 0)
        {
            res.head(n).noalias() -= system_.C.transpose() * mu.cwiseProduct(row_scale_);
            res.tail(m) = rhs.tail(m) - (system_.C * x).cwiseProduct(row_scale_);
        }
        rel = res.norm() / scale;
        refinements = step;
    }
    if (!(rel <= rtol_) && rhs.norm() > 0.0)
        throw NumericalError("saddle solve: residual " + std::to_string(rel) + " above tolerance", rel);

    SaddleSolution out;
    out.x = sol.head(n);
    out.multipliers = sol.tail(m).cwiseProduct(row_scale_);
    out.residual = rhs.norm() > 0.0 ? rel : 0.0;
    out.refinements = refinements;
    return out;
}

SaddleSolution solve_saddle(const SaddleSystem& system, const Vector& b, const Vector& c, double rtol)
{
    return SaddleSolver(system, rtol).solve(b, c);
}

Svd svd_small(const Matrix& M)
{
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Matrix to_dense(const SparseMatrix& K)
{
    return Matrix(K);
}

} // namespace dgms
