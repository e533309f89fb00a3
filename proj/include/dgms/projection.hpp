#pragma once

#include "dgms/linalg.hpp"
#include "dgms/mesh.hpp"
#include "dgms/q1.hpp"

namespace dgms {

/// Local operators between a coarse element and its fine children. On a
/// uniform hierarchy they are the same for every coarse element, so only the
/// reference blocks are stored.
class CoarseFineMap
{
public:
    explicit CoarseFineMap(const MeshHierarchy& hier);

    const MeshHierarchy& hierarchy() const { return *hier_; }
    int fine_dofs_per_coarse() const { return 4 * hier_->children_per_element(); }

    /// 4 x (4 #children): entries int lambda_{T,i} mu_{t,k}, children in children() order.
    const Matrix& coupling() const { return coupling_; }
    /// 4 x 4 coarse element mass matrix.
    const Eigen::Matrix4d& coarse_mass() const { return coarse_mass_; }
    /// 4 x (4 #children): coarse coefficients of the local L2 projection.
    const Matrix& projector() const { return projector_; }
    /// (4 #children) x 4: fine coefficients of the coarse basis functions.
    const Matrix& injection() const { return injection_; }

private:
    const MeshHierarchy* hier_;
    Matrix               coupling_;
    Eigen::Matrix4d      coarse_mass_;
    Matrix               projector_;
    Matrix               injection_;
};

DGFunction project_coarse(const CoarseFineMap& map, const DGFunction& v);
/// Element means of v on the mesh of its own level.
Vector project_p0(const Mesh& mesh, const DGFunction& v);
DGFunction inject_coarse(const CoarseFineMap& map, const DGFunction& w);
/// v - inject(Pi_H v).
DGFunction fine_scale_part(const CoarseFineMap& map, const DGFunction& v);

/// Rows 4k+i: int lambda_{coarse[k], i} v over the patch unknowns. Cv = 0
/// exactly when Pi_H v vanishes on the patch.
SparseMatrix constraint_matrix(const CoarseFineMap& map, const Patch& patch);

} // namespace dgms
