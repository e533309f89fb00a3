#pragma once

#include "dgms/coefficient.hpp"
#include "dgms/dg_assembly.hpp"
#include "dgms/mesh.hpp"
#include "dgms/multiscale.hpp"
#include "dgms/qoi.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dgms {

inline constexpr const char* kVersion = "0.3.0";

enum class CoefficientKind { Constant, Stripes, Raster };
enum class ForcingKind { Cosine, One };
enum class QoiKind { Forcing, Indicator };

struct StudyConfig
{
    DomainKind      domain = DomainKind::LShape;
    bool            mixed_boundary = true;  ///< L-shape: Neumann on {y=0} and {x=1}
    CoefficientKind coefficient = CoefficientKind::Constant;
    double          constant_value = 1.0;
    double          stripe_period = 1.0 / 32.0;
    double          stripe_low = 0.01;
    double          stripe_high = 1.0;
    Axis            stripe_axis = Axis::X;
    std::string     raster_path;
    ForcingKind     forcing = ForcingKind::Cosine;

    int              fine_level = 7;
    std::vector<int> coarse_levels{2, 3, 4, 5};
    double           C = 2.0;
    LogBase          log_base = LogBase::Natural;
    int              layers = 0;  ///< explicit L; 0 uses ceil(C log(1/H))
    std::vector<double> sweep_constants{1.0, 1.5, 2.0, 2.5};

    PenaltyRule penalty;
    double      rtol = 1e-10;
    int         max_iterations = 50000;
    double      saddle_rtol = 1e-12;
    double      svd_tol = 0.0;

    std::vector<QoiKind> qoi{QoiKind::Forcing, QoiKind::Indicator};
    std::array<double, 4> indicator_box{0.0, 0.5, 0.5, 1.0};  ///< xmin ymin xmax ymax

    int decay_element = -1;  ///< -1 selects the element nearest the domain centre
    int decay_index = 0;
    int decay_layers = 0;    ///< 0 runs until the patch saturates

    int         threads = 1;
    bool        timings = true;
    bool        force_budget = false;
    std::size_t global_budget = 200000;
    std::string cache_dir;

    /// key = value lines, '#' comments. Unknown keys and malformed values
    /// raise ConfigError naming the line.
    static StudyConfig parse(std::istream& in);
    static StudyConfig load(const std::filesystem::path& path);
    /// Canonical key = value listing of every field (stable order).
    std::string canonical() const;
    void        validate() const;
};

/// FNV-1a hash of the canonical configuration text.
std::uint64_t config_hash(const StudyConfig& cfg);

DomainSpec  make_domain(const StudyConfig& cfg);
Coefficient make_coefficient(const StudyConfig& cfg, const Mesh& fine);
ScalarField make_forcing(const StudyConfig& cfg);
QoiSpec     make_qoi(const StudyConfig& cfg, QoiKind kind);
MultiscaleOptions make_options(const StudyConfig& cfg);

struct StudyRow
{
    double H = 0.0;
    int    ndof = 0;
    int    L = 0;
    double err_energy_rel = 0.0;
    double err_l2_rel = 0.0;
    double err_l2_coarse_rel = 0.0;
    double t_correctors_s = 0.0;
    double t_solve_s = 0.0;
    int    iters_ref = 0;
    int    iters_ms = 0;
};

struct Slopes
{
    double energy = 0.0;
    double l2 = 0.0;
    double l2_coarse = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
Slopes fit_slopes(const std::vector<StudyRow>& rows);

/// Shared state of one coarse level, handed to an optional per-level hook.
struct LevelContext
{
    const StudyConfig&       cfg;
    const MultiscaleProblem& problem;
    const MsBasis&           basis;
    const MsSolver&          solver;
    const ReferenceSolution& reference;
    const MsSolution&        ms;
    const StudyRow&          row;
};

using LevelHook = std::function<void(const LevelContext&)>;

struct StudyResult
{
    std::vector<StudyRow>              rows;
    Slopes                             slopes;
    std::map<int, std::uint64_t>       cache_keys;  ///< coarse level -> problem hash
};

StudyResult run_convergence_study(const StudyConfig& cfg, const LevelHook& hook = {});

struct SweepRow
{
    double C = 0.0;
    StudyRow row;
};

struct SweepResult
{
    std::vector<SweepRow>        rows;  ///< ordered by C, then coarse level
    std::map<int, std::uint64_t> cache_keys;
};

SweepResult run_localization_sweep(const StudyConfig& cfg);

struct DecayResult
{
    int          coarse_level = 0;
    int          element = -1;
    int          index = 0;
    DecayProfile profile;
};

DecayResult run_decay_study(const StudyConfig& cfg);

struct QoiRow
{
    double   H = 0.0;
    int      ndof = 0;
    QoiKind  kind = QoiKind::Forcing;
    QoiBound bound;
};

struct QoiResult
{
    StudyResult         study;
    std::vector<QoiRow> rows;
};

QoiResult run_qoi_study(const StudyConfig& cfg);

/// Coarse element whose midpoint is closest to the centre of the domain's
/// bounding box, ties broken by the lower index.
int central_element(const Mesh& coarse);

// Output
std::string format_double(double v);
std::string study_csv(const std::vector<StudyRow>& rows);
std::vector<StudyRow> parse_study_csv(std::istream& in);

struct Manifest
{
    std::string                  study;
    const StudyConfig*           cfg = nullptr;
    Slopes                       slopes;
    bool                         has_slopes = false;
    std::map<int, std::uint64_t> cache_keys;
    std::map<std::string, std::string> extra;
};

/// Writes study.csv, study.json and plot.gnuplot into dir.
void emit_outputs(const std::vector<StudyRow>& rows, const Manifest& manifest, const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Invariant suite on a small problem; prints one line per check.
bool run_verify(const StudyConfig& cfg, std::ostream& out);

} // namespace dgms
