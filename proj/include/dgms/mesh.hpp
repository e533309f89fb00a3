#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

namespace dgms {

enum class DomainKind { UnitSquare, LShape };
enum class Axis { X, Y };
enum class BoundaryTag { Dirichlet, Neumann };
enum class FaceKind { Interior, Dirichlet, Neumann };

/// Tags every boundary face lying on the line {axis-coordinate == value}.
struct BoundarySelector
{
    Axis        axis;
    double      value;
    BoundaryTag tag;
};

/// Unit square, or the L-shape obtained by removing the lower right quadrant.
struct DomainSpec
{
    DomainKind                    kind = DomainKind::UnitSquare;
    std::vector<BoundarySelector> selectors;

    static DomainSpec unit_square_dirichlet();
    /// L-shape with Neumann data on {y=0} and {x=1}, Dirichlet elsewhere.
    static DomainSpec l_shape_mixed();
    static DomainSpec l_shape_dirichlet();

    /// Whether the cell (ix, iy) of the 2^level x 2^level grid lies in the domain.
    bool contains_cell(int level, int ix, int iy) const;
    int  min_level() const { return kind == DomainKind::LShape ? 1 : 0; }
};

inline constexpr int kMaxLevel = 12;

/// Oriented mesh face. Interior faces point from `minus` (the lower element
/// index) to `plus`; boundary faces carry the outward normal and plus == -1.
struct Face
{
    int      minus = -1;
    int      plus  = -1;
    Axis     normal_axis = Axis::X;
    int      normal_sign = 1;
    FaceKind kind = FaceKind::Interior;

    bool is_boundary() const { return plus < 0; }
};

/// Local side numbering of a quadrilateral.
enum Side : int { West = 0, East = 1, South = 2, North = 3 };

struct FacePartition
{
    std::vector<int> interior;
    std::vector<int> dirichlet;
    std::vector<int> neumann;
};

/// Uniform Cartesian mesh with cell width 2^-level. Immutable after construction.
class Mesh
{
public:
    Mesh(const DomainSpec& domain, int level);

    int    level() const { return level_; }
    int    cells_per_side() const { return n_; }
    double width() const { return h_; }

    std::size_t num_elements() const { return cells_.size(); }
    std::size_t num_faces() const { return faces_.size(); }
    std::size_t num_dofs() const { return 4 * cells_.size(); }

    const std::array<int, 2>& cell(int e) const { return cells_[e]; }
    std::array<double, 2>     origin(int e) const { return {cells_[e][0] * h_, cells_[e][1] * h_}; }
    int                       element_at(int ix, int iy) const;
    /// Element containing the point, or -1 (points on shared edges go to the upper/right cell).
    int locate(double x, double y) const;

    const std::vector<Face>&  faces() const { return faces_; }
    const Face&               face(int f) const { return faces_[f]; }
    const std::array<int, 4>& element_faces(int e) const { return element_faces_[e]; }
    const DomainSpec&         domain() const { return domain_; }

private:
    DomainSpec                      domain_;
    int                             level_;
    int                             n_;
    double                          h_;
    std::vector<std::array<int, 2>> cells_;
    std::vector<int>                grid_;
    std::vector<Face>               faces_;
    std::vector<std::array<int, 4>> element_faces_;
};

/// Partitions the faces of `mesh` by the boundary selectors of `domain`.
/// Throws ConfigError if a boundary face is uncovered or doubly tagged, or if
/// no Dirichlet face exists.
FacePartition classify_faces(const Mesh& mesh, const DomainSpec& domain);

/// Coarse/fine pair related by uniform quadrisection.
class MeshHierarchy
{
public:
    MeshHierarchy(const DomainSpec& domain, int coarse_level, int fine_level);

    const Mesh& coarse() const { return coarse_; }
    const Mesh& fine() const { return fine_; }

    /// Fine cells per coarse cell along one axis.
    int ratio() const { return ratio_; }
    int children_per_element() const { return ratio_ * ratio_; }

    /// Fine children of a coarse element, row-major within the coarse cell.
    const std::vector<int>& children(int T) const { return children_[T]; }
    int                     parent(int t) const { return parent_[t]; }
    /// Position of the fine element within children(parent(t)).
    int child_slot(int t) const { return slot_[t]; }

private:
    Mesh                          coarse_;
    Mesh                          fine_;
    int                           ratio_;
    std::vector<std::vector<int>> children_;
    std::vector<int>              parent_;
    std::vector<int>              slot_;
};

MeshHierarchy build_hierarchy(const DomainSpec& domain, int coarse_level, int fine_level);

/// Patch radius meaning "grow until the whole domain is covered".
inline constexpr int kSaturate = std::numeric_limits<int>::max();

/// Element patch of L coarse layers around a coarse element; layer 1 is the
/// element itself and every further layer adds all elements touching the
/// closure of the previous one.
struct Patch
{
    int              center = -1;
    int              layers = 1;
    std::vector<int> coarse;  ///< ascending coarse element ids
    std::vector<int> fine;    ///< children of coarse[0], coarse[1], ... in children() order
    std::vector<int> faces;   ///< fine faces with at least one adjacent patch element, ascending

    std::size_t num_dofs() const { return 4 * fine.size(); }
};

/// Coarse element ids of the patch only.
std::vector<int> patch_elements(const Mesh& coarse, int T, int L);

Patch patch(const MeshHierarchy& hier, int T, int L);

/// Smallest number of layers whose patch around T covers the whole coarse mesh.
int saturation_layers(const Mesh& coarse, int T);

} // namespace dgms
