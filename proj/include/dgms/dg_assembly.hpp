#pragma once

#include "dgms/coefficient.hpp"
#include "dgms/linalg.hpp"
#include "dgms/mesh.hpp"
#include "dgms/q1.hpp"

#include <functional>
#include <span>
#include <vector>

namespace dgms {

enum class PenaltyMode { Plain, Weighted };

/// Face penalty sigma_e = sigma0 (plain) or sigma0 * max(A-, A+) (weighted);
/// the bilinear form uses sigma_e / h_e.
struct PenaltyRule
{
    double      sigma0 = 10.0;
    PenaltyMode mode = PenaltyMode::Weighted;

    double face_sigma(double a_minus, double a_plus) const
    {
        return mode == PenaltyMode::Weighted ? sigma0 * std::max(a_minus, a_plus) : sigma0;
    }
};

/// Symmetric interior penalty operator over a mesh or a patch.
struct SipOperator
{
    SparseMatrix     matrix;
    PenaltyRule      rule;
    std::vector<int> elements;  ///< elements in scope; local dof 4*i+j belongs to elements[i]
    std::vector<int> faces;     ///< faces whose terms were summed
};

/// The three blocks of the SIP form: a_h = volume + consistency + penalty.
/// volume + penalty is the Gram matrix of the energy norm.
struct SipParts
{
    SparseMatrix volume;
    SparseMatrix consistency;
    SparseMatrix penalty;

    SparseMatrix total() const { return volume + consistency + penalty; }
    SparseMatrix energy() const { return volume + penalty; }
};

SipOperator assemble_sip(const Mesh& mesh, const Coefficient& A, const PenaltyRule& pen);
/// Patch restriction: functions are extended by zero, so every face touching
/// the patch contributes with a zero exterior trace. A is given on the fine mesh.
SipOperator assemble_sip(const MeshHierarchy& hier, const Patch& patch, const Coefficient& A,
                         const PenaltyRule& pen);

SipParts assemble_sip_parts(const Mesh& mesh, const Coefficient& A, const PenaltyRule& pen);
SipParts assemble_sip_parts(const MeshHierarchy& hier, const Patch& patch, const Coefficient& A,
                            const PenaltyRule& pen);

SparseMatrix assemble_mass(const Mesh& mesh);

using ScalarField = std::function<double(double, double)>;

/// Entries int_T f lambda_{T,j}, by tensor Gauss quadrature with `points` per axis.
Vector assemble_load(const Mesh& mesh, const ScalarField& f, int points = 6);
/// Entries int v lambda_{T,j} for a discrete density on the same mesh.
Vector assemble_load(const Mesh& mesh, const DGFunction& f);

/// Linear trace on a face, parametrized by the tangential coordinate t in [0, 1].
struct FaceTrace
{
    double start = 0.0;
    double end = 0.0;

    double at(double t) const { return (1.0 - t) * start + t * end; }
};

FaceTrace trace(const Mesh& mesh, const DGFunction& v, int face, bool minus_side);
/// [v] = v- - v+ on interior faces, v itself on boundary faces.
FaceTrace jump(const Mesh& mesh, const DGFunction& v, int face);
/// {v} = (v- + v+)/2 on interior faces, v itself on boundary faces.
FaceTrace average(const Mesh& mesh, const DGFunction& v, int face);

double l2_norm(const Mesh& mesh, const Vector& v);
double jump_seminorm(const Mesh& mesh, const Vector& v, const Coefficient& A, const PenaltyRule& pen);
double energy_norm(const Mesh& mesh, const Vector& v, const Coefficient& A, const PenaltyRule& pen);

/// Per-element ||A^{1/2} grad v||^2 and per-face sigma_e/h_e ||[v]||^2
/// (zero on Neumann faces); summing everything gives the squared energy norm.
struct EnergyContributions
{
    std::vector<double> element;
    std::vector<double> face;
};

EnergyContributions energy_contributions(const Mesh& mesh, const Vector& v, const Coefficient& A,
                                         const PenaltyRule& pen);

struct ReferenceSolution
{
    DGFunction u;
    SolveStats stats;
    bool       direct = false;
};

/// Fine-level dG solve a_h(u_h, v) = F(v). Meshes up to level 3 use a dense
/// Cholesky factorization, larger ones block-Jacobi preconditioned CG.
ReferenceSolution solve_reference(const Mesh& fine, const SparseMatrix& sip, const Vector& load,
                                  const CgOptions& opts = {});
ReferenceSolution solve_reference(const MeshHierarchy& hier, const Coefficient& A, const PenaltyRule& pen,
                                  const ScalarField& f, const CgOptions& opts = {});

/// One sample of traces (v-, v+, w-, w+, u-, u+) on a face.
struct TraceSample
{
    double v_minus, v_plus, w_minus, w_plus, u_minus, u_plus;
};

struct IdentityResiduals
{
    double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;

    double max() const { return std::max(std::max(a1, a2), std::max(a3, a4)); }
};

/// Largest absolute residual of the jump/average product identities over the samples.
IdentityResiduals verify_face_identities(std::span<const TraceSample> samples);

} // namespace dgms
