#include "dgms/dg_assembly.hpp"
#include "dgms/errors.hpp"
#include "dgms/projection.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dgms;

namespace {

DGFunction random_fine(const Mesh& m, unsigned seed)
{
    std::mt19937                           rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DGFunction                             v = DGFunction::zero(m, Level::Fine);
    for (auto& x : v.coeffs)
        x = u(rng);
    return v;
}

} // namespace

TEST(Projection, MatchesElementMassOracle)
{
    MeshHierarchy       h(DomainSpec::l_shape_mixed(), 1, 3);
    const CoarseFineMap map(h);
    const DGFunction    v = random_fine(h.fine(), 1);
    const DGFunction    p = project_coarse(map, v);
    EXPECT_EQ(p.level, Level::Coarse);
    EXPECT_LT((p.coeffs - oracle::project(h, v.coeffs)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projection, LevelTwoOracle)
{
    MeshHierarchy       h(DomainSpec::unit_square_dirichlet(), 1, 2);
    const CoarseFineMap map(h);
    const DGFunction    v = random_fine(h.fine(), 2);
    EXPECT_LT((project_coarse(map, v).coeffs - oracle::project(h, v.coeffs)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Projection, IdempotentAndPythagorean)
{
    MeshHierarchy       h(DomainSpec::l_shape_mixed(), 2, 4);
    const CoarseFineMap map(h);
    const DGFunction    v = random_fine(h.fine(), 3);
    const DGFunction    pv = inject_coarse(map, project_coarse(map, v));
    const DGFunction    ppv = inject_coarse(map, project_coarse(map, pv));
    EXPECT_LT((pv.coeffs - ppv.coeffs).norm(), 1e-12 * pv.coeffs.norm());

    const DGFunction f = fine_scale_part(map, v);
    const double     a = l2_norm(h.fine(), v.coeffs), b = l2_norm(h.fine(), pv.coeffs), c = l2_norm(h.fine(), f.coeffs);
    EXPECT_NEAR(a * a, b * b + c * c, 1e-12 * a * a);
    EXPECT_LT(project_coarse(map, f).coeffs.norm(), 1e-12 * f.coeffs.norm());
}

TEST(Projection, InjectionIsExactForCoarseFunctions)
{
    MeshHierarchy       h(DomainSpec::unit_square_dirichlet(), 2, 4);
    const CoarseFineMap map(h);
    const DGFunction    w = random_fine(h.coarse(), 4);
    DGFunction          wc{Level::Coarse, w.coeffs};
    EXPECT_LT((project_coarse(map, inject_coarse(map, wc)).coeffs - wc.coeffs).norm(), 1e-12);
}

TEST(Projection, P0IsElementMean)
{
    Mesh             m(DomainSpec::unit_square_dirichlet(), 2);
    const DGFunction v{Level::Fine, interpolate(m, [](double x, double y) { return 3 * x * y + x; })};
    const Vector     means = project_p0(m, v);
    for (int e = 0; e < static_cast<int>(m.num_elements()); ++e)
    {
        const auto   o = m.origin(e);
        const double cx = o[0] + m.width() / 2, cy = o[1] + m.width() / 2;
        EXPECT_NEAR(means[e], 3 * cx * cy + cx, 1e-14);
    }
}

TEST(Constraint, SingleElementBlock)
{
    MeshHierarchy       h(DomainSpec::unit_square_dirichlet(), 0, 1);
    const CoarseFineMap map(h);
    const Patch         p = patch(h, 0, 1);
    const Matrix        C = to_dense(constraint_matrix(map, p));
    ASSERT_EQ(C.rows(), 4);
    ASSERT_EQ(C.cols(), 16);
    EXPECT_EQ(Eigen::FullPivLU<Matrix>(C).rank(), 4);
    EXPECT_LT((C - oracle::coupling(h)).cwiseAbs().maxCoeff(), 1e-14);
    // C applied to the injected coarse basis is the coarse mass matrix
    EXPECT_LT((C * map.injection() - Matrix(map.coarse_mass())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Constraint, KernelIsFineScaleSpace)
{
    MeshHierarchy       h(DomainSpec::l_shape_mixed(), 2, 3);
    const CoarseFineMap map(h);
    const Patch         p = patch(h, 3, 2);
    const SparseMatrix  C = constraint_matrix(map, p);
    const DGFunction    f = fine_scale_part(map, random_fine(h.fine(), 5));
    Vector              local(static_cast<Eigen::Index>(p.num_dofs()));
    for (std::size_t i = 0; i < p.fine.size(); ++i)
        local.segment<4>(4 * i) = f.coeffs.segment<4>(4 * p.fine[i]);
    EXPECT_LT((C * local).norm(), 1e-13);
}

TEST(Projection, EqualLevelsRejected)
{
    MeshHierarchy h(DomainSpec::unit_square_dirichlet(), 2, 2);
    EXPECT_THROW(CoarseFineMap{h}, ConfigError);
}
