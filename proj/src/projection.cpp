#include "dgms/projection.hpp"

#include "dgms/errors.hpp"

#include <Eigen/Cholesky>

namespace dgms {

CoarseFineMap::CoarseFineMap(const MeshHierarchy& hier)
    : hier_(&hier)
{
    if (hier.fine().level() <= hier.coarse().level())
        throw ConfigError("projection needs at least one refinement between coarse and fine level");

    const int    r = hier.ratio();
    const int    nc = r * r;
    const double h = hier.fine().width();
    const double H = hier.coarse().width();
    const auto&  g = q1::gauss(2);

    coupling_ = Matrix::Zero(4, 4 * nc);
    injection_.resize(4 * nc, 4);
    for (int c = 0; c < nc; ++c)
    {
        const int cx = c % r, cy = c / r;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
            {
                const double xi = g.points[a], eta = g.points[b];
                const double X = (cx + xi) / r, Y = (cy + eta) / r;
                const double w = h * h * g.weights[a] * g.weights[b];
                for (int i = 0; i < 4; ++i)
                    for (int k = 0; k < 4; ++k)
                        coupling_(i, 4 * c + k) += w * q1::shape(i, X, Y) * q1::shape(k, xi, eta);
            }
        for (int k = 0; k < 4; ++k)
        {
            const auto v = q1::vertex(k);
            for (int i = 0; i < 4; ++i)
                injection_(4 * c + k, i) = q1::shape(i, (cx + v[0]) / r, (cy + v[1]) / r);
        }
    }

    coarse_mass_.setZero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 4; ++i)
                for (int k = 0; k < 4; ++k)
                    coarse_mass_(i, k) += H * H * g.weights[a] * g.weights[b] * q1::shape(i, g.points[a], g.points[b]) *
                                          q1::shape(k, g.points[a], g.points[b]);

    projector_ = coarse_mass_.llt().solve(coupling_);
}

DGFunction project_coarse(const CoarseFineMap& map, const DGFunction& v)
{
    const auto& hier = map.hierarchy();
    if (v.coeffs.size() != static_cast<Eigen::Index>(hier.fine().num_dofs()))
        throw ConfigError("project_coarse expects a fine-level function");
    DGFunction out = DGFunction::zero(hier.coarse(), Level::Coarse);
    const int  n = map.fine_dofs_per_coarse();
    Vector     local(n);
    for (int T = 0; T < static_cast<int>(hier.coarse().num_elements()); ++T)
    {
        const auto& kids = hier.children(T);
        for (std::size_t c = 0; c < kids.size(); ++c)
            local.segment<4>(4 * c) = v.coeffs.segment<4>(4 * kids[c]);
        out.coeffs.segment<4>(4 * T) = map.projector() * local;
    }
    return out;
}

Vector project_p0(const Mesh& mesh, const DGFunction& v)
{
    if (v.coeffs.size() != static_cast<Eigen::Index>(mesh.num_dofs()))
        throw ConfigError("project_p0: function does not live on this mesh");
    // The mean of a bilinear function is the mean of its vertex values.
    Vector m(static_cast<Eigen::Index>(mesh.num_elements()));
    for (Eigen::Index e = 0; e < m.size(); ++e)
        m[e] = 0.25 * v.coeffs.segment<4>(4 * e).sum();
    return m;
}

DGFunction inject_coarse(const CoarseFineMap& map, const DGFunction& w)
{
    const auto& hier = map.hierarchy();
    if (w.coeffs.size() != static_cast<Eigen::Index>(hier.coarse().num_dofs()))
        throw ConfigError("inject_coarse expects a coarse-level function");
    DGFunction out = DGFunction::zero(hier.fine(), Level::Fine);
    for (int T = 0; T < static_cast<int>(hier.coarse().num_elements()); ++T)
    {
        const Vector local = map.injection() * w.coeffs.segment<4>(4 * T);
        const auto&  kids = hier.children(T);
        for (std::size_t c = 0; c < kids.size(); ++c)
            out.coeffs.segment<4>(4 * kids[c]) = local.segment<4>(4 * c);
    }
    return out;
}

DGFunction fine_scale_part(const CoarseFineMap& map, const DGFunction& v)
{
    DGFunction out = v;
    out.coeffs -= inject_coarse(map, project_coarse(map, v)).coeffs;
    return out;
}

SparseMatrix constraint_matrix(const CoarseFineMap& map, const Patch& patch)
{
    const int    n = map.fine_dofs_per_coarse();
    const auto   m = static_cast<Eigen::Index>(4 * patch.coarse.size());
    SparseMatrix C(m, static_cast<Eigen::Index>(patch.num_dofs()));
    C.reserve(Eigen::VectorXi::Constant(m, n));
    for (std::size_t k = 0; k < patch.coarse.size(); ++k)
        for (int i = 0; i < 4; ++i)
            for (int c = 0; c < n; ++c)
                C.insert(static_cast<Eigen::Index>(4 * k + i), static_cast<Eigen::Index>(n * k + c)) =
                    map.coupling()(i, c);
    C.makeCompressed();
    return C;
}

} // namespace dgms
