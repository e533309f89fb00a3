#include "dgms/errors.hpp"
#include "dgms/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dgms;

namespace {

SparseMatrix laplace_1d(int n)
{
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i)
    {
        t.emplace_back(i, i, 2.0);
        if (i > 0)
            t.emplace_back(i, i - 1, -1.0);
        if (i + 1 < n)
            t.emplace_back(i, i + 1, -1.0);
    }
    SparseMatrix K(n, n);
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

SparseMatrix random_constraints(int m, int n, unsigned seed)
{
    std::mt19937                           rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix                                 C(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            C(i, j) = u(rng);
    return C.sparseView();
}

} // namespace

TEST(Cg, SolvesSpdSystem)
{
    const SparseMatrix K = laplace_1d(200);
    const Vector       x = Vector::LinSpaced(200, -1.0, 2.0);
    const Vector       b = K * x;
    SolveStats         st;
    const Vector       y = cg_solve(K, b, BlockJacobi::uniform(K, 4), {1e-12, 1000}, &st);
    EXPECT_LT((y - x).norm() / x.norm(), 1e-9);
    EXPECT_LE(st.relative_residual, 1e-12);
    EXPECT_GT(st.iterations, 0);
}

TEST(Cg, BudgetExhaustionCarriesResidual)
{
    const SparseMatrix K = laplace_1d(400);
    const Vector       b = Vector::Ones(400);
    try
    {
        cg_solve(K, b, {}, {1e-14, 3});
        FAIL() << "expected NumericalError";
    }
    catch (const NumericalError& e)
    {
        EXPECT_GT(e.residual(), 1e-14);
    }
}

TEST(Saddle, MatchesDenseKkt)
{
    const int          n = 30, m = 5;
    const SparseMatrix K = laplace_1d(n);
    const SparseMatrix C = random_constraints(m, n, 7);
    const Vector       b = Vector::LinSpaced(n, 0.0, 1.0);
    const Vector       c = Vector::LinSpaced(m, 1.0, 2.0);

    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = to_dense(K);
    kkt.topRightCorner(n, m) = to_dense(C).transpose();
    kkt.bottomLeftCorner(m, n) = to_dense(C);
    Vector rhs(n + m);
    rhs << b, c;
    const Vector ref = kkt.fullPivLu().solve(rhs);

    const SaddleSolution s = solve_saddle({K, C}, b, c);
    EXPECT_LT((s.x - ref.head(n)).norm(), 1e-10 * ref.head(n).norm());
    EXPECT_LT((s.multipliers - ref.tail(m)).norm(), 1e-9 * ref.tail(m).norm());
    EXPECT_LE(s.residual, 1e-12);
}

TEST(Saddle, ReusedFactorizationForManyRightHandSides)
{
    const SparseMatrix K = laplace_1d(40);
    const SparseMatrix C = random_constraints(4, 40, 11);
    SaddleSolver       solver({K, C});
    for (int k = 0; k < 3; ++k)
    {
        const Vector b = Vector::Unit(40, 5 * k);
        const auto   s = solver.solve(b, Vector::Zero(4));
        EXPECT_LT((to_dense(C) * s.x).norm(), 1e-12);
        EXPECT_LT((K * s.x + C.transpose() * s.multipliers - b).norm(), 1e-10);
    }
}

TEST(Saddle, RankDeficientConstraintsFail)
{
    const SparseMatrix K = laplace_1d(20);
    Matrix             c = to_dense(random_constraints(3, 20, 3));
    c.row(2) = c.row(0) + c.row(1);
    const Vector rhs(Vector::Ones(20));
    Vector       cv(3);
    cv << 1.0, 0.0, 0.0;  // inconsistent with the dependent row
    EXPECT_THROW(solve_saddle({K, SparseMatrix(c.sparseView())}, rhs, cv), NumericalError);
}

TEST(Svd, ReconstructsAndSorts)
{
    Matrix M = Matrix::Random(9, 5);
    M.col(4) = M.col(0) * 2.0;
    const Svd s = svd_small(M);
    for (Eigen::Index i = 1; i < s.sigma.size(); ++i)
        EXPECT_GE(s.sigma[i - 1], s.sigma[i]);
    EXPECT_LT((s.U * s.sigma.asDiagonal() * s.V.transpose() - M).norm(), 1e-12 * M.norm());
    EXPECT_LT(s.sigma[4], 1e-12 * s.sigma[0]);
}

TEST(BlockJacobi, InvertsBlockDiagonalExactly)
{
    Matrix d = Matrix::Zero(6, 6);
    d.block(0, 0, 2, 2) << 4, 1, 1, 3;
    d.block(2, 2, 4, 4) = Matrix::Identity(4, 4) * 2 + Matrix::Ones(4, 4);
    const SparseMatrix K = d.sparseView();
    BlockJacobi        pre(K, {0, 2, 6});
    const Vector       r = Vector::LinSpaced(6, 1, 6);
    Vector             z;
    pre.apply(r, z);
    EXPECT_LT((d * z - r).norm(), 1e-13);
}
