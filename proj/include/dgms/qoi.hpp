#pragma once

#include "dgms/dg_assembly.hpp"
#include "dgms/multiscale.hpp"

namespace dgms {

/// Linear functional g(v) = int g v with an L2 density g.
struct QoiSpec
{
    ScalarField density;
    int         quadrature_points = 6;

    /// Vector G with g(v) = G^T v on the given mesh.
    Vector representer(const Mesh& mesh) const { return assemble_load(mesh, density, quadrature_points); }
};

/// Dual reference problem a_h(v, phi_h) = g(v); a_h is symmetric, so this is
/// the primal solve with load G.
ReferenceSolution solve_dual_reference(const MultiscaleProblem& prob, const QoiSpec& g, const CgOptions& opts = {});
MsSolution        solve_dual_msfem(const MsSolver& solver, const Mesh& fine, const QoiSpec& g);

struct QoiBound
{
    double exact_gap = 0.0;      ///< |g(u_h) - g(u_ms)|
    double error_primal = 0.0;   ///< energy norm of u_h - u_ms
    double error_dual = 0.0;     ///< energy norm of phi_h - phi_ms
    double product_bound = 0.0;  ///< error_primal * error_dual

    bool holds(double rel_slack = 1e-8) const { return exact_gap <= product_bound * (1.0 + rel_slack); }
};

QoiBound qoi_error_bound(const MultiscaleProblem& prob, const QoiSpec& g, const Vector& u_h, const Vector& u_ms,
                         const Vector& phi_h, const Vector& phi_ms);

struct L2Estimate
{
    double estimate = 0.0;  ///< H times the energy norm of u_h - u_ms
    double measured = 0.0;  ///< L2 norm of u_h - u_ms
};

L2Estimate l2_error_estimate(const MultiscaleProblem& prob, const Vector& u_h, const Vector& u_ms);

} // namespace dgms
