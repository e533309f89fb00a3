#include "dgms/dg_assembly.hpp"

#include "dgms/errors.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <mutex>

namespace dgms {

namespace {

using Mat4 = Eigen::Matrix4d;
using Mat8 = Eigen::Matrix<double, 8, 8>;

constexpr int kFacePoints = 3;
constexpr int kVolumePoints = 2;

/// Reference kernels, all independent of the mesh width in two dimensions.
struct Kernels
{
    Mat4 stiffness;           // int grad N_i . grad N_j
    Mat4 mass;                // int N_i N_j on the unit square
    // Interior faces, indexed by normal axis. S = J^T W D and P = J^T W J
    // with J the jump and D the reference normal derivative on both sides.
    std::array<Mat8, 2> interior_s;
    std::array<Mat8, 2> interior_p;
    // Boundary faces, indexed by [axis][sign > 0]; D is the outward derivative.
    std::array<std::array<Mat4, 2>, 2> boundary_s;
    std::array<std::array<Mat4, 2>, 2> boundary_p;
};

// Value and derivative along `axis` of N_j at normal coordinate c, tangential t.
std::pair<double, double> face_eval(int j, Axis axis, double c, double t)
{
    const double xi = axis == Axis::X ? c : t;
    const double eta = axis == Axis::X ? t : c;
    const auto   g = q1::grad(j, xi, eta);
    return {q1::shape(j, xi, eta), axis == Axis::X ? g[0] : g[1]};
}

Kernels build_kernels()
{
    Kernels k;
    const auto& vq = q1::gauss(kVolumePoints);
    k.stiffness.setZero();
    k.mass.setZero();
    for (int a = 0; a < kVolumePoints; ++a)
        for (int b = 0; b < kVolumePoints; ++b)
        {
            const double w = vq.weights[a] * vq.weights[b];
            const double xi = vq.points[a], eta = vq.points[b];
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                {
                    const auto gi = q1::grad(i, xi, eta);
                    const auto gj = q1::grad(j, xi, eta);
                    k.stiffness(i, j) += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    k.mass(i, j) += w * q1::shape(i, xi, eta) * q1::shape(j, xi, eta);
                }
        }

    const auto& fq = q1::gauss(kFacePoints);
    for (int ax = 0; ax < 2; ++ax)
    {
        const Axis axis = ax == 0 ? Axis::X : Axis::Y;
        Eigen::Matrix<double, kFacePoints, 8> J, D;
        for (int q = 0; q < kFacePoints; ++q)
            for (int j = 0; j < 4; ++j)
            {
                const auto [vm, dm] = face_eval(j, axis, 1.0, fq.points[q]);
                const auto [vp, dp] = face_eval(j, axis, 0.0, fq.points[q]);
                J(q, j) = vm;
                J(q, 4 + j) = -vp;
                D(q, j) = dm;
                D(q, 4 + j) = dp;
            }
        const Eigen::Matrix<double, kFacePoints, 1> w =
            Eigen::Map<const Eigen::Matrix<double, kFacePoints, 1>>(fq.weights.data());
        k.interior_s[ax] = J.transpose() * w.asDiagonal() * D;
        k.interior_p[ax] = J.transpose() * w.asDiagonal() * J;

        for (int s = 0; s < 2; ++s)
        {
            const double c = s ? 1.0 : 0.0;
            const double sign = s ? 1.0 : -1.0;
            Eigen::Matrix<double, kFacePoints, 4> Jb, Db;
            for (int q = 0; q < kFacePoints; ++q)
                for (int j = 0; j < 4; ++j)
                {
                    const auto [v, d] = face_eval(j, axis, c, fq.points[q]);
                    Jb(q, j) = v;
                    Db(q, j) = sign * d;
                }
            k.boundary_s[ax][s] = Jb.transpose() * w.asDiagonal() * Db;
            k.boundary_p[ax][s] = Jb.transpose() * w.asDiagonal() * Jb;
        }
    }
    return k;
}

const Kernels& kernels()
{
    static std::once_flag once;
    static Kernels k;
    std::call_once(once, [] { k = build_kernels(); });
    return k;
}

struct Scope
{
    const std::vector<int>* elements;
    const std::vector<int>* faces;
    std::vector<int>        local;  // global element -> local index or -1
};

using Triplets = std::vector<Eigen::Triplet<double>>;

struct PartTriplets
{
    Triplets volume, consistency, penalty;
};

template <typename M>
void scatter(Triplets& out, const M& block, std::span<const int> rows)
{
    for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    {
        if (rows[i] < 0)
            continue;
        for (int j = 0; j < static_cast<int>(rows.size()); ++j)
            if (rows[j] >= 0 && block(i, j) != 0.0)
                out.emplace_back(rows[i], rows[j], block(i, j));
    }
}

PartTriplets assemble_triplets(const Mesh& mesh, const Coefficient& A, const PenaltyRule& pen, const Scope& scope)
{
    if (!(pen.sigma0 > 0.0))
        throw ConfigError("penalty sigma0 must be positive");
    if (A.size() != mesh.num_elements())
        throw ConfigError("coefficient does not match the mesh");

    const Kernels& k = kernels();
    PartTriplets   out;
    out.volume.reserve(16 * scope.elements->size());
    out.consistency.reserve(64 * scope.faces->size());
    out.penalty.reserve(64 * scope.faces->size());

    for (int e : *scope.elements)
    {
        const int base = 4 * scope.local[e];
        const std::array<int, 4> rows{base, base + 1, base + 2, base + 3};
        scatter(out.volume, (A[e] * k.stiffness).eval(), rows);
    }

    for (int fid : *scope.faces)
    {
        const Face& f = mesh.face(fid);
        if (f.kind == FaceKind::Neumann)
            continue;
        const int ax = f.normal_axis == Axis::X ? 0 : 1;
        if (f.is_boundary())
        {
            const int lm = scope.local[f.minus];
            if (lm < 0)
                continue;
            const double a = A[f.minus];
            const int    s = f.normal_sign > 0 ? 1 : 0;
            const Mat4&  S = k.boundary_s[ax][s];
            const Mat4   cons = -a * (S + S.transpose());
            const Mat4   penm = pen.face_sigma(a, a) * k.boundary_p[ax][s];
            const std::array<int, 4> rows{4 * lm, 4 * lm + 1, 4 * lm + 2, 4 * lm + 3};
            scatter(out.consistency, cons, rows);
            scatter(out.penalty, penm, rows);
            continue;
        }
        const int lm = scope.local[f.minus];
        const int lp = scope.local[f.plus];
        if (lm < 0 && lp < 0)
            continue;
        const double am = A[f.minus], ap = A[f.plus];
        Eigen::Matrix<double, 8, 1> a;
        a << am, am, am, am, ap, ap, ap, ap;
        const Mat8& S = k.interior_s[ax];
        const Mat8  cons = -0.5 * (S * a.asDiagonal() + a.asDiagonal() * S.transpose());
        const Mat8  penm = pen.face_sigma(am, ap) * k.interior_p[ax];
        std::array<int, 8> rows;
        for (int j = 0; j < 4; ++j)
        {
            rows[j] = lm < 0 ? -1 : 4 * lm + j;
            rows[4 + j] = lp < 0 ? -1 : 4 * lp + j;
        }
        scatter(out.consistency, cons, rows);
        scatter(out.penalty, penm, rows);
    }
    return out;
}

SparseMatrix to_sparse(const Triplets& t, Eigen::Index n)
{
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

std::vector<int> all_elements(const Mesh& mesh)
{
    std::vector<int> e(mesh.num_elements());
    for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = static_cast<int>(i);
    return e;
}

std::vector<int> all_faces(const Mesh& mesh)
{
    std::vector<int> f(mesh.num_faces());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = static_cast<int>(i);
    return f;
}

std::vector<int> local_map(std::size_t n, const std::vector<int>& elements)
{
    std::vector<int> local(n, -1);
    for (std::size_t i = 0; i < elements.size(); ++i)
        local[elements[i]] = static_cast<int>(i);
    return local;
}

SipParts parts_from(const PartTriplets& t, Eigen::Index n)
{
    return {to_sparse(t.volume, n), to_sparse(t.consistency, n), to_sparse(t.penalty, n)};
}

SparseMatrix total_from(PartTriplets&& t, Eigen::Index n)
{
    Triplets all = std::move(t.volume);
    all.insert(all.end(), t.consistency.begin(), t.consistency.end());
    all.insert(all.end(), t.penalty.begin(), t.penalty.end());
    return to_sparse(all, n);
}

} // namespace

SipOperator assemble_sip(const Mesh& mesh, const Coefficient& A, const PenaltyRule& pen)
{
    SipOperator op;
    op.rule = pen;
    op.elements = all_elements(mesh);
    op.faces = all_faces(mesh);
    const Scope scope{&op.elements, &op.faces, op.elements};
    op.matrix = total_from(assemble_triplets(mesh, A, pen, scope), static_cast<Eigen::Index>(mesh.num_dofs()));
    return op;
}

SipOperator assemble_sip(const MeshHierarchy& hier, const Patch& patch, const Coefficient& A, const PenaltyRule& pen)
{
    SipOperator op;
    op.rule = pen;
    op.elements = patch.fine;
    op.faces = patch.faces;
    const Scope scope{&op.elements, &op.faces, local_map(hier.fine().num_elements(), op.elements)};
    op.matrix = total_from(assemble_triplets(hier.fine(), A, pen, scope),
                           static_cast<Eigen::Index>(patch.num_dofs()));
    return op;
}

SipParts assemble_sip_parts(const Mesh& mesh, const Coefficient& A, const PenaltyRule& pen)
{
    const auto  elements = all_elements(mesh);
    const auto  faces = all_faces(mesh);
    const Scope scope{&elements, &faces, elements};
    return parts_from(assemble_triplets(mesh, A, pen, scope), static_cast<Eigen::Index>(mesh.num_dofs()));
}

SipParts assemble_sip_parts(const MeshHierarchy& hier, const Patch& patch, const Coefficient& A,
                            const PenaltyRule& pen)
{
    const Scope scope{&patch.fine, &patch.faces, local_map(hier.fine().num_elements(), patch.fine)};
    return parts_from(assemble_triplets(hier.fine(), A, pen, scope), static_cast<Eigen::Index>(patch.num_dofs()));
}

SparseMatrix assemble_mass(const Mesh& mesh)
{
    const Mat4 m = mesh.width() * mesh.width() * kernels().mass;
    Triplets   t;
    t.reserve(16 * mesh.num_elements());
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    {
        const std::array<int, 4> rows{4 * e, 4 * e + 1, 4 * e + 2, 4 * e + 3};
        scatter(t, m, rows);
    }
    return to_sparse(t, static_cast<Eigen::Index>(mesh.num_dofs()));
}

Vector assemble_load(const Mesh& mesh, const ScalarField& f, int points)
{
    const auto&  g = q1::gauss(points);
    const double h = mesh.width();
    Vector       F = Vector::Zero(static_cast<Eigen::Index>(mesh.num_dofs()));
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    {
        const auto o = mesh.origin(e);
        for (int a = 0; a < points; ++a)
            for (int b = 0; b < points; ++b)
            {
                const double xi = g.points[a], eta = g.points[b];
                const double fw = h * h * g.weights[a] * g.weights[b] * f(o[0] + h * xi, o[1] + h * eta);
                for (int j = 0; j < 4; ++j)
                    F[4 * e + j] += fw * q1::shape(j, xi, eta);
            }
    }
    return F;
}

Vector assemble_load(const Mesh& mesh, const DGFunction& f)
{
    if (f.coeffs.size() != static_cast<Eigen::Index>(mesh.num_dofs()))
        throw ConfigError("density does not live on this mesh");
    const Mat4 m = mesh.width() * mesh.width() * kernels().mass;
    Vector     F(f.coeffs.size());
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
        F.segment<4>(4 * e) = m * f.coeffs.segment<4>(4 * e);
    return F;
}

FaceTrace trace(const Mesh& mesh, const DGFunction& v, int face, bool minus_side)
{
    if (v.coeffs.size() != static_cast<Eigen::Index>(mesh.num_dofs()))
        throw ConfigError("function and face live on different mesh levels");
    const Face& f = mesh.face(face);
    const int   e = minus_side ? f.minus : f.plus;
    if (e < 0)
        return {};
    double c;
    if (f.is_boundary())
        c = f.normal_sign > 0 ? 1.0 : 0.0;
    else
        c = minus_side ? 1.0 : 0.0;
    FaceTrace tr;
    for (int j = 0; j < 4; ++j)
    {
        tr.start += v.coeffs[4 * e + j] * face_eval(j, f.normal_axis, c, 0.0).first;
        tr.end += v.coeffs[4 * e + j] * face_eval(j, f.normal_axis, c, 1.0).first;
    }
    return tr;
}

FaceTrace jump(const Mesh& mesh, const DGFunction& v, int face)
{
    const FaceTrace m = trace(mesh, v, face, true);
    if (mesh.face(face).is_boundary())
        return m;
    const FaceTrace p = trace(mesh, v, face, false);
    return {m.start - p.start, m.end - p.end};
}

FaceTrace average(const Mesh& mesh, const DGFunction& v, int face)
{
    const FaceTrace m = trace(mesh, v, face, true);
    if (mesh.face(face).is_boundary())
        return m;
    const FaceTrace p = trace(mesh, v, face, false);
    return {0.5 * (m.start + p.start), 0.5 * (m.end + p.end)};
}

double l2_norm(const Mesh& mesh, const Vector& v)
{
    const Mat4 m = mesh.width() * mesh.width() * kernels().mass;
    double     s = 0.0;
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    {
        const Eigen::Vector4d ve = v.segment<4>(4 * e);
        s += ve.dot(m * ve);
    }
    return std::sqrt(std::max(s, 0.0));
}

EnergyContributions energy_contributions(const Mesh& mesh, const Vector& v, const Coefficient& A,
                                         const PenaltyRule& pen)
{
    if (v.size() != static_cast<Eigen::Index>(mesh.num_dofs()))
        throw ConfigError("function does not live on this mesh");
    const Kernels&      k = kernels();
    EnergyContributions c;
    c.element.resize(mesh.num_elements());
    c.face.assign(mesh.num_faces(), 0.0);
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    {
        const Eigen::Vector4d ve = v.segment<4>(4 * e);
        c.element[e] = std::max(A[e] * ve.dot(k.stiffness * ve), 0.0);
    }
    for (int fid = 0; fid < static_cast<int>(mesh.num_faces()); ++fid)
    {
        const Face& f = mesh.face(fid);
        if (f.kind == FaceKind::Neumann)
            continue;
        const int ax = f.normal_axis == Axis::X ? 0 : 1;
        if (f.is_boundary())
        {
            const Eigen::Vector4d ve = v.segment<4>(4 * f.minus);
            const double          a = A[f.minus];
            c.face[fid] = std::max(pen.face_sigma(a, a) * ve.dot(k.boundary_p[ax][f.normal_sign > 0] * ve), 0.0);
            continue;
        }
        Eigen::Matrix<double, 8, 1> vv;
        vv << v.segment<4>(4 * f.minus), v.segment<4>(4 * f.plus);
        c.face[fid] = std::max(pen.face_sigma(A[f.minus], A[f.plus]) * vv.dot(k.interior_p[ax] * vv), 0.0);
    }
    return c;
}

double jump_seminorm(const Mesh& mesh, const Vector& v, const Coefficient& A, const PenaltyRule& pen)
{
    const auto c = energy_contributions(mesh, v, A, pen);
    double     s = 0.0;
    for (double x : c.face)
        s += x;
    return std::sqrt(s);
}

double energy_norm(const Mesh& mesh, const Vector& v, const Coefficient& A, const PenaltyRule& pen)
{
    const auto c = energy_contributions(mesh, v, A, pen);
    double     s = 0.0;
    for (double x : c.element)
        s += x;
    for (double x : c.face)
        s += x;
    return std::sqrt(s);
}

ReferenceSolution solve_reference(const Mesh& fine, const SparseMatrix& sip, const Vector& load, const CgOptions& opts)
{
    ReferenceSolution out;
    out.u.level = Level::Fine;
    if (fine.level() <= 3)
    {
        Eigen::LLT<Matrix> llt(to_dense(sip));
        if (llt.info() != Eigen::Success)
            throw NumericalError("reference operator not positive definite", 0.0);
        out.u.coeffs = llt.solve(load);
        const double bn = load.norm();
        out.stats = {0, bn > 0.0 ? (sip * out.u.coeffs - load).norm() / bn : 0.0};
        out.direct = true;
        return out;
    }
    out.u.coeffs = cg_solve(sip, load, BlockJacobi::uniform(sip, 4), opts, &out.stats);
    return out;
}

ReferenceSolution solve_reference(const MeshHierarchy& hier, const Coefficient& A, const PenaltyRule& pen,
                                  const ScalarField& f, const CgOptions& opts)
{
    const auto op = assemble_sip(hier.fine(), A, pen);
    return solve_reference(hier.fine(), op.matrix, assemble_load(hier.fine(), f), opts);
}

IdentityResiduals verify_face_identities(std::span<const TraceSample> samples)
{
    IdentityResiduals r;
    for (const auto& s : samples)
    {
        auto jmp = [](double m, double p) { return m - p; };
        auto avg = [](double m, double p) { return 0.5 * (m + p); };
        const double jv = jmp(s.v_minus, s.v_plus), av = avg(s.v_minus, s.v_plus);
        const double jw = jmp(s.w_minus, s.w_plus), aw = avg(s.w_minus, s.w_plus);
        const double ju = jmp(s.u_minus, s.u_plus), au = avg(s.u_minus, s.u_plus);
        const double a_vw = avg(s.v_minus * s.w_minus, s.v_plus * s.w_plus);
        const double j_vu = jmp(s.v_minus * s.u_minus, s.v_plus * s.u_plus);
        const double j_vvu = jmp(s.v_minus * s.v_minus * s.u_minus, s.v_plus * s.v_plus * s.u_plus);
        const double a_vvw = avg(s.v_minus * s.v_minus * s.w_minus, s.v_plus * s.v_plus * s.w_plus);

        const double lhs = a_vw * j_vu;
        const double a1 = aw * j_vvu - jv * aw * av * au - 0.25 * jv * jv * aw * ju + 0.25 * jv * jv * jw * au +
                          0.25 * jv * av * jw * ju;
        const double a2 = a_vvw * ju - 0.25 * jv * jv * aw * ju - 0.25 * jv * av * jw * ju + jv * av * aw * au +
                          0.25 * jv * jv * jw * au;
        const double a3 = aw * j_vvu + a_vvw * ju + 0.5 * jv * jv * jw * au - 0.5 * jv * jv * aw * ju;
        const double a4 = ju * j_vvu - 0.25 * jv * jv * ju * ju + jv * jv * au * au;

        r.a1 = std::max(r.a1, std::abs(lhs - a1));
        r.a2 = std::max(r.a2, std::abs(lhs - a2));
        r.a3 = std::max(r.a3, std::abs(2.0 * lhs - a3));
        r.a4 = std::max(r.a4, std::abs(j_vu * j_vu - a4));
    }
    return r;
}

} // namespace dgms
