#pragma once

#include "dgms/coefficient.hpp"
#include "dgms/dg_assembly.hpp"
#include "dgms/linalg.hpp"
#include "dgms/mesh.hpp"
#include "dgms/projection.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dgms {

/// Everything the corrector and Galerkin solves share: the hierarchy, the
/// fine coefficient, the penalty rule and the global fine SIP matrix.
class MultiscaleProblem
{
public:
    MultiscaleProblem(const MeshHierarchy& hier, const Coefficient& A, const PenaltyRule& pen);

    const MeshHierarchy& hierarchy() const { return *hier_; }
    const Coefficient&   coefficient() const { return *A_; }
    const PenaltyRule&   penalty() const { return pen_; }
    const CoarseFineMap& map() const { return map_; }
    const SparseMatrix&  sip() const { return sip_; }

private:
    const MeshHierarchy* hier_;
    const Coefficient*   A_;
    PenaltyRule          pen_;
    CoarseFineMap        map_;
    SparseMatrix         sip_;
};

struct MultiscaleOptions
{
    int         threads = 1;
    double      saddle_rtol = 1e-12;
    /// Largest patch system (fine unknowns plus multipliers) a global
    /// corrector may use without `force`.
    std::size_t global_budget = 200000;
    bool        force = false;
    /// Directory of the corrector cache; empty disables caching.
    std::string cache_dir;
};

enum class LogBase { Natural, Two };

/// Localization radius ceil(C log(1/H)), at least 1. The natural log is the
/// default; base 2 gives larger patches for the same C.
int localization_layers(double C, double H, LogBase base = LogBase::Natural);

/// The four correctors phi^L_{T,j} of one coarse element, stored over the
/// patch unknowns (patch.fine order); zero outside the patch.
struct ElementCorrectors
{
    int              T = -1;
    int              layers = 1;
    std::vector<int> coarse;  ///< patch coarse elements, ascending
    Matrix           phi;     ///< (4 #patch fine elements) x 4
    Eigen::Vector4d  energy = Eigen::Vector4d::Zero();  ///< energy norms of psi_{T,j}
    double           residual = 0.0;
    int              refinements = 0;
};

/// One corrector phi^L_{T,j} as a fine-mesh function.
struct Corrector
{
    int        T = -1;
    int        j = 0;
    int        layers = 1;
    DGFunction phi;
    double     residual = 0.0;
};

/// Solves the four corrector problems of T on Patch(T, L) with one
/// factorization of the constrained patch system.
ElementCorrectors element_correctors(const MultiscaleProblem& prob, int T, int L, const MultiscaleOptions& opts = {});

Corrector corrector(const MultiscaleProblem& prob, int T, int j, int L, const MultiscaleOptions& opts = {});
/// Corrector on the whole domain. Refuses (ConfigError) when the system
/// exceeds opts.global_budget unless opts.force is set.
Corrector global_corrector(const MultiscaleProblem& prob, int T, int j, const MultiscaleOptions& opts = {});

/// Corrected basis psi_{T,j} = inject(lambda_{T,j}) - phi^L_{T,j}; column 4T+j.
class MsBasis
{
public:
    MsBasis(const MultiscaleProblem& prob, int layers, std::vector<ElementCorrectors> correctors);

    const MultiscaleProblem& problem() const { return *prob_; }
    int                      layers() const { return layers_; }
    int                      columns() const { return 4 * static_cast<int>(correctors_.size()); }
    const ElementCorrectors& element(int T) const { return correctors_[T]; }

    /// Coarse elements whose basis functions may be nonzero on T' (ascending).
    const std::vector<int>& covering(int Tp) const { return covering_[Tp]; }

    /// Values of psi_{T,j} on one fine element; zero outside the patch of T.
    Eigen::Vector4d local_values(int T, int j, int fine_element) const;
    /// Values of phi_{T,j} (without the coarse part) on one fine element.
    Eigen::Vector4d corrector_values(int T, int j, int fine_element) const;

    DGFunction column(int c) const;
    /// Fine function sum_c coeffs[c] psi_c.
    DGFunction reconstruct(const Vector& coeffs) const;

    /// Energy norms of every basis function, the stability diagnostic.
    std::vector<double> stability_norms() const;

private:
    const MultiscaleProblem*       prob_;
    int                            layers_;
    std::vector<ElementCorrectors> correctors_;
    std::vector<std::vector<int>>  covering_;
};

/// Computes all correctors for radius L (kSaturate for the ideal space) with a
/// parallel map over the coarse elements; the result does not depend on the
/// thread count.
MsBasis build_ms_space(const MultiscaleProblem& prob, int L, const MultiscaleOptions& opts = {});

struct MsSolution
{
    Vector     coarse;  ///< coefficients in the corrected basis
    DGFunction u;       ///< fine reconstruction
    int        refinements = 0;
    double     residual = 0.0;
};

/// Galerkin projection onto span(MsBasis). The stiffness Psi^T K Psi is
/// assembled densely once and factorized by Cholesky.
class MsSolver
{
public:
    explicit MsSolver(const MsBasis& basis);

    /// Solves with the fine load vector F (entries F(mu_{t,k})).
    MsSolution solve(const Vector& fine_load) const;

    const Matrix& stiffness() const { return stiffness_; }
    double        rcond() const { return rcond_; }

private:
    const MsBasis*     basis_;
    Matrix             stiffness_;
    Eigen::LLT<Matrix> llt_;
    double             rcond_ = 0.0;
};

/// Psi^T v for a fine vector v.
Vector restrict_to_basis(const MsBasis& basis, const Vector& fine);

MsSolution solve_msfem(const MsBasis& basis, const ScalarField& f, int quadrature_points = 6);
/// Ideal method: global correctors (budget-checked) and one Galerkin solve.
MsSolution solve_ideal_msfem(const MultiscaleProblem& prob, const ScalarField& f, const MultiscaleOptions& opts = {});

struct DecayProfile
{
    std::vector<int>      k;
    std::vector<double>   tail;   ///< energy norm of phi outside Patch(T, k)
    std::optional<double> gamma;  ///< fitted rate when at least 3 tails are positive
};

/// Tails for k = 1..K, summed in a fixed order so they are exactly nonincreasing.
DecayProfile decay_profile(const MultiscaleProblem& prob, const Corrector& c, int K);
/// exp of the least-squares slope of log(tail) against k over positive tails.
/// Throws ConfigError with fewer than 3 usable layers.
double fit_decay_rate(const DecayProfile& profile);

/// Element-local SVD compression of the corrected space: on each coarse
/// element T' the pieces lambda_{T',i} and phi_{T,j} restricted to T'.
struct CompressedElement
{
    Matrix basis;   ///< (4 #children) x rank, orthonormal in the local energy product
    Vector sigma;   ///< all singular values, nonincreasing
    int    pieces = 0;
};

struct CompressedBasis
{
    const MultiscaleProblem* problem = nullptr;
    double                   svd_tol = 0.0;
    std::vector<CompressedElement> elements;
    std::vector<int>               offsets;  ///< first global column of each element, plus the total

    int dimension() const { return offsets.empty() ? 0 : offsets.back(); }
    int pieces() const;
};

CompressedBasis compress_space(const MsBasis& basis, double svd_tol);

struct CompressedSolution
{
    Vector     coeffs;
    DGFunction w;
    SolveStats stats;
};

CompressedSolution solve_compressed(const CompressedBasis& cb, const Vector& fine_load, const CgOptions& opts = {});

} // namespace dgms
