#pragma once

#include "dgms/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace dgms {

/// Vertex-based bilinear basis on the reference square [0,1]^2. Local index
/// j = a + 2b belongs to the vertex (a, b), so 0:(0,0) 1:(1,0) 2:(0,1) 3:(1,1).
namespace q1 {

inline double shape(int j, double xi, double eta)
{
    const double sx = (j & 1) ? xi : 1.0 - xi;
    const double sy = (j & 2) ? eta : 1.0 - eta;
    return sx * sy;
}

inline std::array<double, 2> grad(int j, double xi, double eta)
{
    const double sx = (j & 1) ? xi : 1.0 - xi;
    const double sy = (j & 2) ? eta : 1.0 - eta;
    const double dx = (j & 1) ? 1.0 : -1.0;
    const double dy = (j & 2) ? 1.0 : -1.0;
    return {dx * sy, sx * dy};
}

inline std::array<double, 2> vertex(int j) { return {double(j & 1), double((j >> 1) & 1)}; }

/// Gauss-Legendre rule on [0, 1].
struct GaussRule
{
    std::vector<double> points;
    std::vector<double> weights;
};

/// Rules with 1..12 points, computed once.
const GaussRule& gauss(int npoints);

} // namespace q1

enum class Level { Coarse, Fine };

/// Element-wise bilinear function: coefficient 4*e + j multiplies basis j of element e.
struct DGFunction
{
    Level           level = Level::Fine;
    Eigen::VectorXd coeffs;

    static DGFunction zero(const Mesh& mesh, Level level)
    {
        return {level, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_dofs()))};
    }
};

/// Value of v restricted to element e at the physical point (x, y).
double evaluate_on(const Mesh& mesh, const Eigen::VectorXd& v, int e, double x, double y);
/// Value at a point; NaN outside the domain.
double evaluate(const Mesh& mesh, const Eigen::VectorXd& v, double x, double y);

/// Interpolates a callable at the element vertices (exact for bilinear data).
template <typename F>
Eigen::VectorXd interpolate(const Mesh& mesh, const F& f)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(mesh.num_dofs()));
    const double h = mesh.width();
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    {
        const auto o = mesh.origin(e);
        for (int j = 0; j < 4; ++j)
        {
            const auto p = q1::vertex(j);
            v[4 * e + j] = f(o[0] + p[0] * h, o[1] + p[1] * h);
        }
    }
    return v;
}

} // namespace dgms
