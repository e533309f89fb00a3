#include "dgms/mesh.hpp"

#include "dgms/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgms {

DomainSpec DomainSpec::unit_square_dirichlet()
{
    DomainSpec d;
    d.kind = DomainKind::UnitSquare;
    d.selectors = {{Axis::X, 0.0, BoundaryTag::Dirichlet},
                   {Axis::X, 1.0, BoundaryTag::Dirichlet},
                   {Axis::Y, 0.0, BoundaryTag::Dirichlet},
                   {Axis::Y, 1.0, BoundaryTag::Dirichlet}};
    return d;
}

DomainSpec DomainSpec::l_shape_mixed()
{
    DomainSpec d;
    d.kind = DomainKind::LShape;
    d.selectors = {{Axis::Y, 0.0, BoundaryTag::Neumann},
                   {Axis::X, 1.0, BoundaryTag::Neumann},
                   {Axis::X, 0.0, BoundaryTag::Dirichlet},
                   {Axis::Y, 1.0, BoundaryTag::Dirichlet},
                   {Axis::X, 0.5, BoundaryTag::Dirichlet},
                   {Axis::Y, 0.5, BoundaryTag::Dirichlet}};
    return d;
}

DomainSpec DomainSpec::l_shape_dirichlet()
{
    DomainSpec d = l_shape_mixed();
    for (auto& s : d.selectors)
        s.tag = BoundaryTag::Dirichlet;
    return d;
}

bool DomainSpec::contains_cell(int level, int ix, int iy) const
{
    const int n = 1 << level;
    if (ix < 0 || iy < 0 || ix >= n || iy >= n)
        return false;
    if (kind == DomainKind::LShape)
        return !(2 * ix >= n && 2 * iy < n);
    return true;
}

namespace {

std::array<double, 2> face_midpoint(const Mesh& mesh, const Face& f)
{
    const auto   o = mesh.origin(f.minus);
    const double h = mesh.width();
    const bool   high = f.normal_sign > 0;
    if (f.normal_axis == Axis::X)
        return {o[0] + (high ? h : 0.0), o[1] + 0.5 * h};
    return {o[0] + 0.5 * h, o[1] + (high ? h : 0.0)};
}

FaceKind classify_boundary_face(const Mesh& mesh, const Face& f, const DomainSpec& domain)
{
    const auto   mid = face_midpoint(mesh, f);
    const double tol = 1e-12;
    const double coord = f.normal_axis == Axis::X ? mid[0] : mid[1];

    bool found = false;
    BoundaryTag tag = BoundaryTag::Dirichlet;
    for (const auto& s : domain.selectors)
    {
        if (s.axis != f.normal_axis || std::abs(coord - s.value) > tol)
            continue;
        if (found && s.tag != tag)
            throw ConfigError("boundary face at (" + std::to_string(mid[0]) + ", " +
                              std::to_string(mid[1]) + ") matched by conflicting selectors");
        found = true;
        tag = s.tag;
    }
    if (!found)
        throw ConfigError("boundary face at (" + std::to_string(mid[0]) + ", " +
                          std::to_string(mid[1]) + ") not covered by any boundary selector");
    return tag == BoundaryTag::Dirichlet ? FaceKind::Dirichlet : FaceKind::Neumann;
}

} // namespace

Mesh::Mesh(const DomainSpec& domain, int level)
    : domain_(domain), level_(level)
{
    if (level < domain.min_level() || level > kMaxLevel)
        throw ConfigError("mesh level " + std::to_string(level) + " outside supported range [" +
                          std::to_string(domain.min_level()) + ", " + std::to_string(kMaxLevel) + "]");
    n_ = 1 << level;
    h_ = 1.0 / n_;

    grid_.assign(static_cast<std::size_t>(n_) * n_, -1);
    for (int iy = 0; iy < n_; ++iy)
        for (int ix = 0; ix < n_; ++ix)
            if (domain.contains_cell(level, ix, iy))
            {
                grid_[static_cast<std::size_t>(iy) * n_ + ix] = static_cast<int>(cells_.size());
                cells_.push_back({ix, iy});
            }

    element_faces_.assign(cells_.size(), {-1, -1, -1, -1});
    auto add_face = [&](Face f) {
        const int id = static_cast<int>(faces_.size());
        faces_.push_back(f);
        return id;
    };

    for (int e = 0; e < static_cast<int>(cells_.size()); ++e)
    {
        const auto [ix, iy] = cells_[e];
        const int west = element_at(ix - 1, iy);
        const int south = element_at(ix, iy - 1);

        if (west >= 0)
        {
            const int id = add_face({west, e, Axis::X, 1, FaceKind::Interior});
            element_faces_[west][East] = id;
            element_faces_[e][West] = id;
        }
        else
            element_faces_[e][West] = add_face({e, -1, Axis::X, -1, FaceKind::Dirichlet});

        if (south >= 0)
        {
            const int id = add_face({south, e, Axis::Y, 1, FaceKind::Interior});
            element_faces_[south][North] = id;
            element_faces_[e][South] = id;
        }
        else
            element_faces_[e][South] = add_face({e, -1, Axis::Y, -1, FaceKind::Dirichlet});

        if (element_at(ix + 1, iy) < 0)
            element_faces_[e][East] = add_face({e, -1, Axis::X, 1, FaceKind::Dirichlet});
        if (element_at(ix, iy + 1) < 0)
            element_faces_[e][North] = add_face({e, -1, Axis::Y, 1, FaceKind::Dirichlet});
    }

    bool any_dirichlet = false;
    for (auto& f : faces_)
        if (f.is_boundary())
        {
            f.kind = classify_boundary_face(*this, f, domain);
            any_dirichlet = any_dirichlet || f.kind == FaceKind::Dirichlet;
        }
    if (!any_dirichlet)
        throw ConfigError("Dirichlet boundary must be nonempty");
}

int Mesh::element_at(int ix, int iy) const
{
    if (ix < 0 || iy < 0 || ix >= n_ || iy >= n_)
        return -1;
    return grid_[static_cast<std::size_t>(iy) * n_ + ix];
}

int Mesh::locate(double x, double y) const
{
    const int ix = std::clamp(static_cast<int>(std::floor(x / h_)), 0, n_ - 1);
    const int iy = std::clamp(static_cast<int>(std::floor(y / h_)), 0, n_ - 1);
    if (x < 0.0 || y < 0.0 || x > 1.0 || y > 1.0)
        return -1;
    return element_at(ix, iy);
}

FacePartition classify_faces(const Mesh& mesh, const DomainSpec& domain)
{
    FacePartition part;
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f)
    {
        const Face& face = mesh.face(f);
        if (!face.is_boundary())
        {
            part.interior.push_back(f);
            continue;
        }
        if (classify_boundary_face(mesh, face, domain) == FaceKind::Dirichlet)
            part.dirichlet.push_back(f);
        else
            part.neumann.push_back(f);
    }
    if (part.dirichlet.empty())
        throw ConfigError("Dirichlet boundary must be nonempty");
    return part;
}

MeshHierarchy::MeshHierarchy(const DomainSpec& domain, int coarse_level, int fine_level)
    : coarse_(domain, coarse_level), fine_(domain, std::max(fine_level, coarse_level))
{
    if (fine_level < coarse_level)
        throw ConfigError("fine level " + std::to_string(fine_level) + " below coarse level " +
                          std::to_string(coarse_level));
    ratio_ = 1 << (fine_level - coarse_level);

    children_.assign(coarse_.num_elements(), {});
    parent_.assign(fine_.num_elements(), -1);
    slot_.assign(fine_.num_elements(), -1);
    for (int T = 0; T < static_cast<int>(coarse_.num_elements()); ++T)
    {
        const auto [cx, cy] = coarse_.cell(T);
        auto& kids = children_[T];
        kids.reserve(static_cast<std::size_t>(ratio_) * ratio_);
        for (int jy = 0; jy < ratio_; ++jy)
            for (int jx = 0; jx < ratio_; ++jx)
            {
                const int t = fine_.element_at(cx * ratio_ + jx, cy * ratio_ + jy);
                parent_[t] = T;
                slot_[t] = static_cast<int>(kids.size());
                kids.push_back(t);
            }
    }
}

MeshHierarchy build_hierarchy(const DomainSpec& domain, int coarse_level, int fine_level)
{
    if (coarse_level < domain.min_level() || fine_level < coarse_level)
        throw ConfigError("require " + std::to_string(domain.min_level()) +
                          " <= coarse_level <= fine_level");
    return MeshHierarchy(domain, coarse_level, fine_level);
}

std::vector<int> patch_elements(const Mesh& coarse, int T, int L)
{
    std::vector<char> in(coarse.num_elements(), 0);
    std::vector<int>  members{T};
    in[T] = 1;
    // Each growth step adds every element touching the closure of the current
    // patch; on a Cartesian grid these are exactly the king-move neighbours.
    for (int layer = 1; layer < L; ++layer)
    {
        std::vector<int> added;
        for (int e : members)
        {
            const auto [ix, iy] = coarse.cell(e);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                {
                    const int nb = coarse.element_at(ix + dx, iy + dy);
                    if (nb >= 0 && !in[nb])
                    {
                        in[nb] = 1;
                        added.push_back(nb);
                    }
                }
        }
        if (added.empty())
            break;
        members.insert(members.end(), added.begin(), added.end());
    }
    std::sort(members.begin(), members.end());
    return members;
}

int saturation_layers(const Mesh& coarse, int T)
{
    int L = 1;
    while (patch_elements(coarse, T, L).size() < coarse.num_elements())
        ++L;
    return L;
}

Patch patch(const MeshHierarchy& hier, int T, int L)
{
    if (L < 1)
        throw ConfigError("patch layers must be >= 1");
    Patch p;
    p.center = T;
    p.layers = L;
    p.coarse = patch_elements(hier.coarse(), T, L);

    const Mesh& fine = hier.fine();
    p.fine.reserve(p.coarse.size() * hier.children_per_element());
    for (int c : p.coarse)
        p.fine.insert(p.fine.end(), hier.children(c).begin(), hier.children(c).end());

    std::vector<char> seen(fine.num_faces(), 0);
    for (int t : p.fine)
        for (int f : fine.element_faces(t))
            if (!seen[f])
            {
                seen[f] = 1;
                p.faces.push_back(f);
            }
    std::sort(p.faces.begin(), p.faces.end());
    return p;
}

} // namespace dgms
