#include "dgms/coefficient.hpp"

#include "dgms/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dgms {

namespace {

bool is_integer_multiple(double value, double unit)
{
    const double q = value / unit;
    return q >= 0.5 && std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q);
}

std::vector<double> parse_numbers(const std::string& line, int lineno)
{
    std::vector<double> out;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end)
    {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r'))
            ++p;
        if (p == end)
            break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r'))
            throw IngestionError("malformed number in raster", lineno);
        out.push_back(v);
        p = next;
    }
    return out;
}

} // namespace

RasterField RasterField::read(std::istream& in)
{
    RasterField r;
    std::string line;
    int lineno = 0;
    int stage = 0;  // 0: dims, 1: extent, 2: rows
    int row = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto nums = parse_numbers(line, lineno);
        if (stage == 0)
        {
            if (nums.size() != 2 || nums[0] < 1 || nums[1] < 1 || nums[0] != std::floor(nums[0]) ||
                nums[1] != std::floor(nums[1]))
                throw IngestionError("raster header must be 'nx ny' with positive integers", lineno);
            r.nx = static_cast<int>(nums[0]);
            r.ny = static_cast<int>(nums[1]);
            r.values.reserve(static_cast<std::size_t>(r.nx) * r.ny);
            stage = 1;
        }
        else if (stage == 1)
        {
            if (nums.size() != 4 || !(nums[2] > nums[0]) || !(nums[3] > nums[1]))
                throw IngestionError("raster extent must be 'xmin ymin xmax ymax' with positive size", lineno);
            r.xmin = nums[0];
            r.ymin = nums[1];
            r.xmax = nums[2];
            r.ymax = nums[3];
            stage = 2;
        }
        else
        {
            if (row >= r.ny)
                throw IngestionError("more raster rows than declared", lineno);
            if (static_cast<int>(nums.size()) != r.nx)
                throw IngestionError("raster row has " + std::to_string(nums.size()) + " values, expected " +
                                         std::to_string(r.nx),
                                     lineno);
            for (double v : nums)
            {
                if (!(v > 0.0) || !std::isfinite(v))
                    throw IngestionError("raster values must be positive and finite", lineno);
                r.values.push_back(v);
            }
            ++row;
        }
    }
    if (stage < 2)
        throw IngestionError("raster header incomplete", lineno);
    if (row != r.ny)
        throw IngestionError("raster has " + std::to_string(row) + " rows, expected " + std::to_string(r.ny),
                             lineno);
    return r;
}

RasterField RasterField::read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IngestionError("cannot open raster file '" + path + "'", 0);
    return read(in);
}

void RasterField::write(std::ostream& out) const
{
    auto put = [&out](double v) {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, end - buf);
    };
    out << nx << ' ' << ny << '\n';
    put(xmin);
    out << ' ';
    put(ymin);
    out << ' ';
    put(xmax);
    out << ' ';
    put(ymax);
    out << '\n';
    for (int j = 0; j < ny; ++j)
    {
        for (int i = 0; i < nx; ++i)
        {
            if (i)
                out << ' ';
            put(at(i, j));
        }
        out << '\n';
    }
}

Coefficient::Coefficient(const Mesh& mesh, std::vector<double> values)
    : values_(std::move(values))
{
    if (values_.size() != mesh.num_elements())
        throw ConfigError("coefficient has " + std::to_string(values_.size()) + " values for " +
                          std::to_string(mesh.num_elements()) + " elements");
    for (double v : values_)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("diffusion coefficient must be positive and finite");
    const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    alpha_ = *lo;
    beta_ = *hi;
}

Coefficient Coefficient::constant(const Mesh& mesh, double value)
{
    if (!(value > 0.0))
        throw ConfigError("constant coefficient must be positive");
    return Coefficient(mesh, std::vector<double>(mesh.num_elements(), value));
}

Coefficient Coefficient::periodic_stripes(const Mesh& mesh, double period, double low, double high, Axis axis)
{
    if (!(low > 0.0) || !(high > 0.0))
        throw ConfigError("stripe values must be positive");
    const double stripe = 0.5 * period;
    if (!(period > 0.0) || !is_integer_multiple(stripe, mesh.width()))
        throw ConfigError("stripe period " + std::to_string(period) + " not resolved by mesh width " +
                          std::to_string(mesh.width()));
    const int cells_per_stripe = static_cast<int>(std::lround(stripe / mesh.width()));

    std::vector<double> v(mesh.num_elements());
    for (std::size_t e = 0; e < v.size(); ++e)
    {
        const int idx = axis == Axis::X ? mesh.cell(static_cast<int>(e))[0] : mesh.cell(static_cast<int>(e))[1];
        v[e] = (idx / cells_per_stripe) % 2 == 0 ? high : low;
    }
    return Coefficient(mesh, std::move(v));
}

Coefficient Coefficient::from_raster(const Mesh& mesh, const RasterField& r)
{
    const double dx = (r.xmax - r.xmin) / r.nx;
    const double dy = (r.ymax - r.ymin) / r.ny;
    const double h = mesh.width();
    auto aligned = [h](double v) { return std::abs(v / h - std::round(v / h)) < 1e-9; };
    if (!is_integer_multiple(dx, h) || !is_integer_multiple(dy, h) || !aligned(r.xmin) || !aligned(r.ymin))
        throw ConfigError("raster grid is not resolved by the mesh of width " + std::to_string(h));

    std::vector<double> v(mesh.num_elements());
    for (std::size_t e = 0; e < v.size(); ++e)
    {
        const auto   o = mesh.origin(static_cast<int>(e));
        const double x = o[0] + 0.5 * h;
        const double y = o[1] + 0.5 * h;
        const int    ix = static_cast<int>(std::floor((x - r.xmin) / dx));
        const int    iy = static_cast<int>(std::floor((y - r.ymin) / dy));
        if (ix < 0 || iy < 0 || ix >= r.nx || iy >= r.ny)
            throw ConfigError("raster extent does not cover the domain");
        v[e] = r.at(ix, r.ny - 1 - iy);
    }
    return Coefficient(mesh, std::move(v));
}

Coefficient Coefficient::load_raster(const Mesh& mesh, const std::string& path)
{
    return from_raster(mesh, RasterField::read_file(path));
}

std::pair<double, double> spectral_bounds(const Coefficient& c)
{
    return {c.alpha(), c.beta()};
}

} // namespace dgms
