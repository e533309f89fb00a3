#include "dgms/corrector_cache.hpp"

#include "dgms/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dgms {

namespace {

struct Fnv1a
{
    std::uint64_t h = 1469598103934665603ull;

    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i)
        {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    template <typename T>
    void value(const T& v)
    {
        bytes(&v, sizeof(T));
    }
};

static_assert(std::endian::native == std::endian::little, "cache records are little-endian");

template <typename T>
void read_raw(std::istream& in, T* data, std::size_t n, const std::filesystem::path& path)
{
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * n));
    if (!in)
        throw IngestionError("truncated corrector record " + path.string(), 2);
}

} // namespace

std::uint64_t problem_hash(const MultiscaleProblem& prob)
{
    Fnv1a       f;
    const auto& hier = prob.hierarchy();
    const auto& dom = hier.fine().domain();
    f.value(static_cast<int>(dom.kind));
    for (const auto& s : dom.selectors)
    {
        f.value(static_cast<int>(s.axis));
        f.value(s.value);
        f.value(static_cast<int>(s.tag));
    }
    f.value(hier.coarse().level());
    f.value(hier.fine().level());
    f.value(prob.penalty().sigma0);
    f.value(static_cast<int>(prob.penalty().mode));
    const auto& a = prob.coefficient().values();
    f.bytes(a.data(), sizeof(double) * a.size());
    return f.h;
}

std::string hex_key(std::uint64_t key)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
    return buf;
}

CorrectorCache::CorrectorCache(std::filesystem::path dir, std::uint64_t key)
    : dir_(std::move(dir)), key_(key)
{
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
        throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path CorrectorCache::record_path(int T, int L) const
{
    const std::string l = L == kSaturate ? std::string("inf") : std::to_string(L);
    return dir_ / ("T" + std::to_string(T) + "_L" + l + ".dgc");
}

std::optional<ElementCorrectors> CorrectorCache::load(int T, int L) const
{
    const auto    path = record_path(T, L);
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string        magic, key;
    int                t = -1, l = -1;
    long long          npatch = -1, rows = -1;
    if (!(hs >> magic >> key >> t >> l >> npatch >> rows) || magic != "dgms-corrector" || npatch < 1 || rows < 1)
        throw IngestionError("malformed corrector record header in " + path.string(), 1);
    if (key != hex_key(key_) || t != T || l != L)
        return std::nullopt;

    ElementCorrectors ec;
    ec.T = T;
    ec.layers = L;
    std::vector<std::int32_t> ids(static_cast<std::size_t>(npatch));
    read_raw(in, ids.data(), ids.size(), path);
    ec.coarse.assign(ids.begin(), ids.end());
    read_raw(in, ec.energy.data(), 4, path);
    ec.phi.resize(rows, 4);
    read_raw(in, ec.phi.data(), static_cast<std::size_t>(rows) * 4, path);
    read_raw(in, &ec.residual, 1, path);
    return ec;
}

void CorrectorCache::store(const ElementCorrectors& ec) const
{
    const auto    path = record_path(ec.T, ec.layers);
    const auto    tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ConfigError("cannot write corrector record " + tmp.string());
        out << "dgms-corrector " << hex_key(key_) << ' ' << ec.T << ' ' << ec.layers << ' ' << ec.coarse.size() << ' '
            << ec.phi.rows() << '\n';
        std::vector<std::int32_t> ids(ec.coarse.begin(), ec.coarse.end());
        out.write(reinterpret_cast<const char*>(ids.data()), static_cast<std::streamsize>(sizeof(std::int32_t) * ids.size()));
        out.write(reinterpret_cast<const char*>(ec.energy.data()), sizeof(double) * 4);
        out.write(reinterpret_cast<const char*>(ec.phi.data()),
                  static_cast<std::streamsize>(sizeof(double) * ec.phi.size()));
        out.write(reinterpret_cast<const char*>(&ec.residual), sizeof(double));
        if (!out)
            throw ConfigError("failed writing corrector record " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace dgms
