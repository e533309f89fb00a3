#pragma once

#include "dgms/multiscale.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace dgms {

/// FNV-1a hash of everything a corrector depends on: domain, levels,
/// coefficient values (bitwise) and penalty rule.
std::uint64_t problem_hash(const MultiscaleProblem& prob);

/// One file per (T, L) in a directory. Each file starts with a text header
///   dgms-corrector <key> <T> <L> <patch elements> <rows>
/// followed by the raw little-endian patch ids (int32), energies and
/// coefficients (float64, column-major). A record whose key differs from the
/// current problem is treated as absent and overwritten on store.
class CorrectorCache
{
public:
    CorrectorCache(std::filesystem::path dir, std::uint64_t key);

    std::optional<ElementCorrectors> load(int T, int L) const;
    void                             store(const ElementCorrectors& ec) const;

    std::uint64_t key() const { return key_; }
    std::filesystem::path record_path(int T, int L) const;

private:
    std::filesystem::path dir_;
    std::uint64_t         key_;
};

std::string hex_key(std::uint64_t key);

} // namespace dgms
