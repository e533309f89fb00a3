#include "dgms/qoi.hpp"

#include "dgms/errors.hpp"

#include <cmath>

namespace dgms {

ReferenceSolution solve_dual_reference(const MultiscaleProblem& prob, const QoiSpec& g, const CgOptions& opts)
{
    const Mesh& fine = prob.hierarchy().fine();
    return solve_reference(fine, prob.sip(), g.representer(fine), opts);
}

MsSolution solve_dual_msfem(const MsSolver& solver, const Mesh& fine, const QoiSpec& g)
{
    return solver.solve(g.representer(fine));
}

QoiBound qoi_error_bound(const MultiscaleProblem& prob, const QoiSpec& g, const Vector& u_h, const Vector& u_ms,
                         const Vector& phi_h, const Vector& phi_ms)
{
    const Mesh& fine = prob.hierarchy().fine();
    const auto  n = static_cast<Eigen::Index>(fine.num_dofs());
    if (u_h.size() != n || u_ms.size() != n || phi_h.size() != n || phi_ms.size() != n)
        throw ConfigError("qoi bound: all functions must live on the fine mesh");
    const Vector G = g.representer(fine);
    QoiBound     b;
    b.exact_gap = std::abs(G.dot(u_h) - G.dot(u_ms));
    b.error_primal = energy_norm(fine, u_h - u_ms, prob.coefficient(), prob.penalty());
    b.error_dual = energy_norm(fine, phi_h - phi_ms, prob.coefficient(), prob.penalty());
    b.product_bound = b.error_primal * b.error_dual;
    return b;
}

L2Estimate l2_error_estimate(const MultiscaleProblem& prob, const Vector& u_h, const Vector& u_ms)
{
    const auto&  hier = prob.hierarchy();
    const Vector e = u_h - u_ms;
    return {hier.coarse().width() * energy_norm(hier.fine(), e, prob.coefficient(), prob.penalty()),
            l2_norm(hier.fine(), e)};
}

} // namespace dgms
