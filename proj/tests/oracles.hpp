#pragma once

// Brute-force dense reference implementations. Everything here works from
// point evaluation of the bilinear basis and its own quadrature, so it shares
// no kernels or index tricks with the library.

#include "dgms/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// 3-point Gauss on [0,1]
inline const std::array<double, 3> gp{0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
inline const std::array<double, 3> gw{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

struct Element
{
    double x0, y0, h;
};

inline Element element(const dgms::Mesh& m, int e)
{
    const auto c = m.cell(e);
    return {c[0] * m.width(), c[1] * m.width(), m.width()};
}

// basis j at vertex (j&1, j>>1), physical coordinates
inline double phi(const Element& el, int j, double x, double y)
{
    const double s = (x - el.x0) / el.h, t = (y - el.y0) / el.h;
    return ((j & 1) ? s : 1 - s) * ((j & 2) ? t : 1 - t);
}

inline std::array<double, 2> dphi(const Element& el, int j, double x, double y)
{
    const double s = (x - el.x0) / el.h, t = (y - el.y0) / el.h;
    const double fx = (j & 1) ? s : 1 - s, fy = (j & 2) ? t : 1 - t;
    const double dx = ((j & 1) ? 1.0 : -1.0) / el.h, dy = ((j & 2) ? 1.0 : -1.0) / el.h;
    return {dx * fy, fx * dy};
}

// Face geometry rebuilt from the element cells: the shared edge, or the
// boundary edge named by the outward normal.
struct FaceGeom
{
    double ax, ay, bx, by;  // endpoints
    double nx, ny;          // unit normal, minus -> plus (outward on the boundary)
};

inline FaceGeom face_geom(const dgms::Mesh& m, const dgms::Face& f)
{
    const Element e = element(m, f.minus);
    const double  s = f.normal_sign;
    if (f.normal_axis == dgms::Axis::X)
    {
        const double x = s > 0 ? e.x0 + e.h : e.x0;
        return {x, e.y0, x, e.y0 + e.h, s, 0.0};
    }
    const double y = s > 0 ? e.y0 + e.h : e.y0;
    return {e.x0, y, e.x0 + e.h, y, 0.0, s};
}

// Dense SIP matrix:
//   sum_T int A grad u grad v
//   - sum_e int {A grad u . n}[v] + {A grad v . n}[u]
//   + sum_e sigma_e/h int [u][v]
// over interior and Dirichlet faces; Neumann faces carry nothing.
inline MatrixXd sip(const dgms::Mesh& m, const std::vector<double>& A, double sigma0, bool weighted,
                    const std::vector<int>& neumann_faces = {})
{
    const int n = static_cast<int>(m.num_dofs());
    MatrixXd  K = MatrixXd::Zero(n, n);
    for (int e = 0; e < static_cast<int>(m.num_elements()); ++e)
    {
        const Element el = element(m, e);
        for (int qx = 0; qx < 3; ++qx)
            for (int qy = 0; qy < 3; ++qy)
            {
                const double x = el.x0 + gp[qx] * el.h, y = el.y0 + gp[qy] * el.h;
                const double w = gw[qx] * gw[qy] * el.h * el.h * A[e];
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                    {
                        const auto gi = dphi(el, i, x, y), gj = dphi(el, j, x, y);
                        K(4 * e + i, 4 * e + j) += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
            }
    }
    for (int fi = 0; fi < static_cast<int>(m.num_faces()); ++fi)
    {
        const auto& f = m.face(fi);
        bool        skip = false;
        for (int nf : neumann_faces)
            skip = skip || nf == fi;
        if (skip)
            continue;
        const FaceGeom g = face_geom(m, f);
        const double   len = m.width();
        // side s: element, sign in the jump, weight in the average
        std::vector<std::array<double, 3>> sides;  // (elem, jump sign, avg weight)
        if (f.plus < 0)
            sides = {{double(f.minus), 1.0, 1.0}};
        else
            sides = {{double(f.minus), 1.0, 0.5}, {double(f.plus), -1.0, 0.5}};
        const double am = A[f.minus], ap = f.plus < 0 ? A[f.minus] : A[f.plus];
        const double sigma = weighted ? sigma0 * std::max(am, ap) : sigma0;
        for (int q = 0; q < 3; ++q)
        {
            const double x = g.ax + gp[q] * (g.bx - g.ax), y = g.ay + gp[q] * (g.by - g.ay);
            const double w = gw[q] * len;
            for (const auto& su : sides)
                for (const auto& sv : sides)
                {
                    const int    eu = static_cast<int>(su[0]), ev = static_cast<int>(sv[0]);
                    const Element elu = element(m, eu), elv = element(m, ev);
                    for (int i = 0; i < 4; ++i)      // test v
                        for (int j = 0; j < 4; ++j)  // trial u
                        {
                            const double vi = sv[1] * phi(elv, i, x, y);
                            const double uj = su[1] * phi(elu, j, x, y);
                            const auto   gu = dphi(elu, j, x, y), gv = dphi(elv, i, x, y);
                            const double fu = su[2] * A[eu] * (gu[0] * g.nx + gu[1] * g.ny);
                            const double fv = sv[2] * A[ev] * (gv[0] * g.nx + gv[1] * g.ny);
                            K(4 * ev + i, 4 * eu + j) += w * (-fu * vi - fv * uj + sigma / len * uj * vi);
                        }
                }
        }
    }
    return K;
}

// int f lambda_{e,j}, 4x4 composite 3-point Gauss per element
inline VectorXd load(const dgms::Mesh& m, const std::function<double(double, double)>& f)
{
    VectorXd b = VectorXd::Zero(static_cast<Eigen::Index>(m.num_dofs()));
    for (int e = 0; e < static_cast<int>(m.num_elements()); ++e)
    {
        const Element el = element(m, e);
        const double  hs = el.h / 4;
        for (int sx = 0; sx < 4; ++sx)
            for (int sy = 0; sy < 4; ++sy)
                for (int qx = 0; qx < 3; ++qx)
                    for (int qy = 0; qy < 3; ++qy)
                    {
                        const double x = el.x0 + (sx + gp[qx]) * hs, y = el.y0 + (sy + gp[qy]) * hs;
                        const double w = gw[qx] * gw[qy] * hs * hs * f(x, y);
                        for (int j = 0; j < 4; ++j)
                            b[4 * e + j] += w * phi(el, j, x, y);
                    }
    }
    return b;
}

// int_a^{a+h} cos(k x) ((x-a)/h)^p dx for p = 0, 1, in closed form
inline double cos_moment(double k, double a, double h, int p)
{
    const double b = a + h;
    if (p == 0)
        return (std::sin(k * b) - std::sin(k * a)) / k;
    return (h * std::sin(k * b) / k + (std::cos(k * b) - std::cos(k * a)) / (k * k)) / h;
}

// Exact load for f = 1 + cos(2 pi x) cos(2 pi y)
inline VectorXd load_cos_exact(const dgms::Mesh& m)
{
    const double k = 2.0 * std::acos(-1.0);
    VectorXd     b(static_cast<Eigen::Index>(m.num_dofs()));
    for (int e = 0; e < static_cast<int>(m.num_elements()); ++e)
    {
        const Element el = element(m, e);
        for (int j = 0; j < 4; ++j)
        {
            const int    a = j & 1, c = (j >> 1) & 1;
            // basis factor is (1-s) or s; int (1-s) = int 1 - int s
            auto mx = [&](int side, double x0) {
                const double m0 = cos_moment(k, x0, el.h, 0), m1 = cos_moment(k, x0, el.h, 1);
                return side ? m1 : m0 - m1;
            };
            b[4 * e + j] = el.h * el.h / 4.0 + mx(a, el.x0) * mx(c, el.y0);
        }
    }
    return b;
}

// Coarse L2 projection coefficients of a fine dG function, by solving the
// coarse element mass system with quadrature over the children.
inline VectorXd project(const dgms::MeshHierarchy& hier, const VectorXd& v)
{
    const auto& C = hier.coarse();
    const auto& F = hier.fine();
    VectorXd    out(static_cast<Eigen::Index>(C.num_dofs()));
    for (int T = 0; T < static_cast<int>(C.num_elements()); ++T)
    {
        const Element   ct = element(C, T);
        Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
        Eigen::Vector4d r = Eigen::Vector4d::Zero();
        for (int t : hier.children(T))
        {
            const Element ft = element(F, t);
            for (int qx = 0; qx < 3; ++qx)
                for (int qy = 0; qy < 3; ++qy)
                {
                    const double x = ft.x0 + gp[qx] * ft.h, y = ft.y0 + gp[qy] * ft.h;
                    const double w = gw[qx] * gw[qy] * ft.h * ft.h;
                    double       vv = 0;
                    for (int k = 0; k < 4; ++k)
                        vv += v[4 * t + k] * phi(ft, k, x, y);
                    for (int i = 0; i < 4; ++i)
                    {
                        r[i] += w * vv * phi(ct, i, x, y);
                        for (int j = 0; j < 4; ++j)
                            M(i, j) += w * phi(ct, i, x, y) * phi(ct, j, x, y);
                    }
                }
        }
        out.segment<4>(4 * T) = M.ldlt().solve(r);
    }
    return out;
}

// rows: int lambda_{T,i} mu_{t,k} for every coarse T, i and fine t, k
inline MatrixXd coupling(const dgms::MeshHierarchy& hier)
{
    const auto& C = hier.coarse();
    const auto& F = hier.fine();
    MatrixXd    B = MatrixXd::Zero(static_cast<Eigen::Index>(C.num_dofs()), static_cast<Eigen::Index>(F.num_dofs()));
    for (int t = 0; t < static_cast<int>(F.num_elements()); ++t)
    {
        const int     T = hier.parent(t);
        const Element ct = element(C, T), ft = element(F, t);
        for (int qx = 0; qx < 3; ++qx)
            for (int qy = 0; qy < 3; ++qy)
            {
                const double x = ft.x0 + gp[qx] * ft.h, y = ft.y0 + gp[qy] * ft.h;
                const double w = gw[qx] * gw[qy] * ft.h * ft.h;
                for (int i = 0; i < 4; ++i)
                    for (int k = 0; k < 4; ++k)
                        B(4 * T + i, 4 * t + k) += w * phi(ct, i, x, y) * phi(ft, k, x, y);
            }
    }
    return B;
}

// Fine coefficients of the coarse basis function lambda_{T,j}
inline VectorXd inject(const dgms::MeshHierarchy& hier, int T, int j)
{
    const auto& F = hier.fine();
    VectorXd    v = VectorXd::Zero(static_cast<Eigen::Index>(F.num_dofs()));
    const Element ct = element(hier.coarse(), T);
    for (int t : hier.children(T))
    {
        const Element ft = element(F, t);
        for (int k = 0; k < 4; ++k)
            v[4 * t + k] = phi(ct, j, ft.x0 + (k & 1) * ft.h, ft.y0 + ((k >> 1) & 1) * ft.h);
    }
    return v;
}

// Corrector by explicit null-space reduction: phi supported on the patch with
// Pi_H phi = 0 and a(phi, w) = a(inject, w) for every such w.
inline VectorXd corrector(const dgms::MeshHierarchy& hier, const MatrixXd& K, const std::vector<int>& patch_coarse,
                          int T, int j)
{
    std::vector<int> dofs;
    for (int P : patch_coarse)
        for (int t : hier.children(P))
            for (int k = 0; k < 4; ++k)
                dofs.push_back(4 * t + k);
    const int n = static_cast<int>(dofs.size());
    const MatrixXd B = coupling(hier);
    MatrixXd       Kp(n, n), Cp(4 * patch_coarse.size(), n);
    for (int a = 0; a < n; ++a)
    {
        for (int b = 0; b < n; ++b)
            Kp(a, b) = K(dofs[a], dofs[b]);
        for (std::size_t r = 0; r < patch_coarse.size(); ++r)
            for (int i = 0; i < 4; ++i)
                Cp(4 * r + i, a) = B(4 * patch_coarse[r] + i, dofs[a]);
    }
    const VectorXd lam = inject(hier, T, j);
    VectorXd       rhs(n);
    for (int a = 0; a < n; ++a)
        rhs[a] = (K.row(dofs[a]) * lam).value();

    Eigen::JacobiSVD<MatrixXd> svd(Cp, Eigen::ComputeFullV);
    const int      rank = static_cast<int>(Cp.rows());
    const MatrixXd Z = svd.matrixV().rightCols(n - rank);
    const VectorXd y = (Z.transpose() * Kp * Z).ldlt().solve(Z.transpose() * rhs);
    const VectorXd loc = Z * y;
    VectorXd       out = VectorXd::Zero(K.rows());
    for (int a = 0; a < n; ++a)
        out[dofs[a]] = loc[a];
    return out;
}

} // namespace oracle
