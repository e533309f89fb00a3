#include "dgms/errors.hpp"
#include "dgms/multiscale.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <limits>

namespace dgms {

int CompressedBasis::pieces() const
{
    int s = 0;
    for (const auto& e : elements)
        s += e.pieces;
    return s;
}

CompressedBasis compress_space(const MsBasis& basis, double svd_tol)
{
    if (!(svd_tol >= 0.0))
        throw ConfigError("svd_tol must be nonnegative");
    const auto& prob = basis.problem();
    const auto& hier = prob.hierarchy();
    const int   nT = static_cast<int>(hier.coarse().num_elements());
    const int   n = prob.map().fine_dofs_per_coarse();

    CompressedBasis cb;
    cb.problem = &prob;
    cb.svd_tol = svd_tol;
    cb.elements.resize(nT);
    cb.offsets.assign(1, 0);
    for (int Tp = 0; Tp < nT; ++Tp)
    {
        const auto& S = basis.covering(Tp);
        const auto& kids = hier.children(Tp);
        Matrix      pieces(n, 4 + 4 * static_cast<Eigen::Index>(S.size()));
        pieces.leftCols(4) = prob.map().injection();
        for (std::size_t s = 0; s < S.size(); ++s)
            for (int j = 0; j < 4; ++j)
                for (std::size_t c = 0; c < kids.size(); ++c)
                    pieces.block<4, 1>(4 * c, 4 + 4 * s + j) = basis.corrector_values(S[s], j, kids[c]);

        // Energy product of the element with its faces (zero exterior trace);
        // E = R^T R with R = L^T P from a sparse Cholesky factorization.
        const Patch                   single = patch(hier, Tp, 1);
        const Eigen::SparseMatrix<double> E = assemble_sip_parts(hier, single, prob.coefficient(), prob.penalty()).energy();
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(E);
        if (llt.info() != Eigen::Success)
            throw NumericalError("local energy matrix of coarse element " + std::to_string(Tp) + " is singular", 0.0);
        const Eigen::SparseMatrix<double> Lf = llt.matrixL();
        const Matrix                      rp = Lf.transpose() * (llt.permutationP() * pieces);

        const Svd    svd = svd_small(rp);
        const double smax = svd.sigma.size() ? svd.sigma[0] : 0.0;
        const double floor = static_cast<double>(std::max(rp.rows(), rp.cols())) *
                             std::numeric_limits<double>::epsilon() * smax;
        const double cut = std::max(svd_tol * smax, floor);
        Eigen::Index rank = 0;
        while (rank < svd.sigma.size() && svd.sigma[rank] > cut)
            ++rank;

        CompressedElement& ce = cb.elements[Tp];
        ce.pieces = static_cast<int>(pieces.cols());
        ce.sigma = svd.sigma;
        const Matrix x = llt.matrixU().solve(svd.U.leftCols(rank));
        ce.basis = llt.permutationPinv() * x;
        cb.offsets.push_back(cb.offsets.back() + static_cast<int>(rank));
    }
    return cb;
}

CompressedSolution solve_compressed(const CompressedBasis& cb, const Vector& fine_load, const CgOptions& opts)
{
    if (!cb.problem)
        throw ConfigError("compressed basis is empty");
    const auto&         prob = *cb.problem;
    const auto&         hier = prob.hierarchy();
    const Mesh&         fine = hier.fine();
    const SparseMatrix& K = prob.sip();
    const int           nT = static_cast<int>(hier.coarse().num_elements());
    const int           n = prob.map().fine_dofs_per_coarse();
    if (fine_load.size() != static_cast<Eigen::Index>(fine.num_dofs()))
        throw ConfigError("load vector does not match the fine mesh");

    std::vector<Eigen::Triplet<double>> trips;
    Vector                              F(cb.dimension());
    for (int Tp = 0; Tp < nT; ++Tp)
    {
        const auto&   kids = hier.children(Tp);
        const Matrix& B = cb.elements[Tp].basis;

        Vector local(n);
        for (std::size_t c = 0; c < kids.size(); ++c)
            local.segment<4>(4 * c) = fine_load.segment<4>(4 * kids[c]);
        F.segment(cb.offsets[Tp], B.cols()) = B.transpose() * local;

        // Rows of K on the children of T', split by the coarse element of the column.
        std::vector<int>    neighbours;
        std::vector<Matrix> kb;
        for (int r = 0; r < n; ++r)
        {
            const int row = 4 * kids[r / 4] + r % 4;
            for (SparseMatrix::InnerIterator it(K, row); it; ++it)
            {
                const int  col = static_cast<int>(it.col());
                const int  P = hier.parent(col / 4);
                const auto pos = std::find(neighbours.begin(), neighbours.end(), P) - neighbours.begin();
                if (pos == static_cast<long>(neighbours.size()))
                {
                    neighbours.push_back(P);
                    kb.push_back(Matrix::Zero(n, cb.elements[P].basis.cols()));
                }
                const int lc = 4 * hier.child_slot(col / 4) + col % 4;
                kb[pos].row(r) += it.value() * cb.elements[P].basis.row(lc);
            }
        }
        for (std::size_t k = 0; k < neighbours.size(); ++k)
        {
            const Matrix blk = B.transpose() * kb[k];
            const int    P = neighbours[k];
            for (Eigen::Index a = 0; a < blk.rows(); ++a)
                for (Eigen::Index b = 0; b < blk.cols(); ++b)
                    trips.emplace_back(static_cast<int>(cb.offsets[Tp] + a), static_cast<int>(cb.offsets[P] + b),
                                       blk(a, b));
        }
    }
    SparseMatrix KW(cb.dimension(), cb.dimension());
    KW.setFromTriplets(trips.begin(), trips.end());
    const SparseMatrix KWs = 0.5 * (KW + SparseMatrix(KW.transpose()));

    CompressedSolution out;
    const BlockJacobi  pre(KWs, cb.offsets);
    out.coeffs = cg_solve(KWs, F, pre, opts, &out.stats);
    out.w = DGFunction::zero(fine, Level::Fine);
    for (int Tp = 0; Tp < nT; ++Tp)
    {
        const auto&  kids = hier.children(Tp);
        const Matrix& B = cb.elements[Tp].basis;
        const Vector local = B * out.coeffs.segment(cb.offsets[Tp], B.cols());
        for (std::size_t c = 0; c < kids.size(); ++c)
            out.w.coeffs.segment<4>(4 * kids[c]) = local.segment<4>(4 * c);
    }
    return out;
}

} // namespace dgms
