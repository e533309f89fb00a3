#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace dgms {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Block-diagonal preconditioner: applies the inverse of each diagonal block
/// [starts[i], starts[i+1]) of K. An empty preconditioner is the identity.
class BlockJacobi
{
public:
    BlockJacobi() = default;
    BlockJacobi(const SparseMatrix& K, std::vector<int> starts);
    static BlockJacobi uniform(const SparseMatrix& K, int block_size);

    void apply(const Vector& r, Vector& z) const;
    bool empty() const { return starts_.empty(); }

private:
    std::vector<int>    starts_;
    std::vector<Matrix> inverses_;
};

struct CgOptions
{
    double rtol = 1e-10;
    int    max_iterations = 50000;
};

struct SolveStats
{
    int    iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for symmetric positive definite K.
/// Throws NumericalError (carrying the achieved relative residual) when the
/// iteration budget runs out.
Vector cg_solve(const SparseMatrix& K, const Vector& b, const BlockJacobi& precond, const CgOptions& opts,
                SolveStats* stats = nullptr);

/// [K C^T; C 0] with K symmetric positive definite on ker C and C of full row rank.
struct SaddleSystem
{
    SparseMatrix K;
    SparseMatrix C;
};

struct SaddleSolution
{
    Vector x;
    Vector multipliers;
    double residual = 0.0;  ///< max of the relative primal and constraint residuals
    int    refinements = 0;
};

/// Factorizes a saddle system once and solves it for any number of right-hand
/// sides. Constraint rows are rescaled internally to unit max-norm.
class SaddleSolver
{
public:
    explicit SaddleSolver(SaddleSystem system, double rtol = 1e-12);
    ~SaddleSolver();
    SaddleSolver(SaddleSolver&&) noexcept;
    SaddleSolver& operator=(SaddleSolver&&) noexcept;

    /// Solves K x + C^T mu = b, C x = c. Throws NumericalError if the
    /// residual target cannot be met (rank-deficient C, singular K on ker C).
    SaddleSolution solve(const Vector& b, const Vector& c) const;

    Eigen::Index primal_size() const { return system_.K.rows(); }
    Eigen::Index constraint_count() const { return system_.C.rows(); }

private:
    struct Factor;
    SaddleSystem            system_;
    Vector                  row_scale_;
    double                  rtol_;
    std::unique_ptr<Factor> factor_;
};

SaddleSolution solve_saddle(const SaddleSystem& system, const Vector& b, const Vector& c, double rtol = 1e-12);

/// Thin singular value decomposition M = U diag(sigma) V^T, sigma nonincreasing.
struct Svd
{
    Matrix U;
    Vector sigma;
    Matrix V;
};

Svd svd_small(const Matrix& M);

/// Dense copy of a sparse matrix (oracles and small problems).
Matrix to_dense(const SparseMatrix& K);

} // namespace dgms
