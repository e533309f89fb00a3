#pragma once

#include "dgms/mesh.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dgms {

/// Row-major raster of positive values; row 0 is the top (max y) row.
struct RasterField
{
    int                 nx = 0;
    int                 ny = 0;
    double              xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;
    std::vector<double> values;

    double at(int ix, int iy_from_top) const { return values[static_cast<std::size_t>(iy_from_top) * nx + ix]; }

    static RasterField read(std::istream& in);
    static RasterField read_file(const std::string& path);
    /// Writes with 17 significant digits, so read(write(r)) == r exactly.
    void write(std::ostream& out) const;
};

/// Isotropic piecewise-constant diffusion a(x) on the elements of one mesh.
class Coefficient
{
public:
    Coefficient() = default;
    /// Throws ConfigError unless values.size() matches and every value is positive.
    Coefficient(const Mesh& mesh, std::vector<double> values);

    static Coefficient constant(const Mesh& mesh, double value);
    /// Alternating stripes of width period/2 along `axis`, starting with `high`
    /// at the origin. The stripe width must be a multiple of the mesh width.
    static Coefficient periodic_stripes(const Mesh& mesh, double period, double low, double high, Axis axis);
    /// Each element takes the raster value at its midpoint.
    static Coefficient from_raster(const Mesh& mesh, const RasterField& raster);
    static Coefficient load_raster(const Mesh& mesh, const std::string& path);

    double operator[](std::size_t e) const { return values_[e]; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

private:
    std::vector<double> values_;
    double              alpha_ = 0.0;
    double              beta_ = 0.0;
};

/// (alpha, beta): exact minimum and maximum over the elements.
std::pair<double, double> spectral_bounds(const Coefficient& c);

} // namespace dgms
