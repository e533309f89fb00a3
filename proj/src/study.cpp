#include "dgms/study.hpp"

#include "dgms/corrector_cache.hpp"
#include "dgms/errors.hpp"
#include "dgms/projection.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace dgms {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(int line, const std::string& key, const std::string& msg)
{
    throw ConfigError("config line " + std::to_string(line) + " (" + key + "): " + msg);
}

double to_double(const std::string& v, int line, const std::string& key)
{
    double      x = 0.0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end)
        bad(line, key, "expected a number, got '" + v + "'");
    return x;
}

long long to_integer(const std::string& v, int line, const std::string& key)
{
    long long   x = 0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end)
        bad(line, key, "expected an integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& v, int line, const std::string& key)
{
    if (v == "on" || v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "off" || v == "false" || v == "no" || v == "0")
        return false;
    bad(line, key, "expected on/off, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream        ss(v);
    std::string              item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(trim(item));
    return out;
}

std::string join(const std::vector<std::string>& items)
{
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i)
        s += (i ? "," : "") + items[i];
    return s;
}

const char* qoi_name(QoiKind k) { return k == QoiKind::Forcing ? "f" : "indicator"; }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StudyRow level_row(const MultiscaleProblem& prob, int L, const ReferenceSolution& ref,
                   const MsSolution& ms)
{
    const auto& hier = prob.hierarchy();
    const Mesh& fine = hier.fine();
    const auto& A = prob.coefficient();
    const auto& pen = prob.penalty();

    const Vector e = ref.u.coeffs - ms.u.coeffs;
    const Vector ec = ref.u.coeffs - inject_coarse(prob.map(), project_coarse(prob.map(), ms.u)).coeffs;
    const double ue = energy_norm(fine, ref.u.coeffs, A, pen);
    const double ul = l2_norm(fine, ref.u.coeffs);

    StudyRow r;
    r.H = hier.coarse().width();
    r.ndof = static_cast<int>(hier.coarse().num_dofs());
    r.L = L;
    r.err_energy_rel = energy_norm(fine, e, A, pen) / ue;
    r.err_l2_rel = l2_norm(fine, e) / ul;
    r.err_l2_coarse_rel = l2_norm(fine, ec) / ul;
    r.iters_ref = ref.stats.iterations;
    r.iters_ms = ms.refinements;
    return r;
}

int layers_for(const StudyConfig& cfg, double C, double H)
{
    return cfg.layers > 0 ? cfg.layers : localization_layers(C, H, cfg.log_base);
}

} // namespace

StudyConfig StudyConfig::parse(std::istream& in)
{
    StudyConfig cfg;
    std::string raw;
    int         line = 0;
    while (std::getline(in, raw))
    {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty())
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(text.substr(0, eq));
        const std::string v = trim(text.substr(eq + 1));

        if (key == "domain")
        {
            if (v == "l-shape")
                cfg.domain = DomainKind::LShape;
            else if (v == "unit-square")
                cfg.domain = DomainKind::UnitSquare;
            else
                bad(line, key, "expected l-shape or unit-square");
        }
        else if (key == "boundary")
        {
            if (v != "mixed" && v != "dirichlet")
                bad(line, key, "expected mixed or dirichlet");
            cfg.mixed_boundary = v == "mixed";
        }
        else if (key == "coefficient")
        {
            if (v == "constant")
                cfg.coefficient = CoefficientKind::Constant;
            else if (v == "stripes")
                cfg.coefficient = CoefficientKind::Stripes;
            else if (v == "raster")
                cfg.coefficient = CoefficientKind::Raster;
            else
                bad(line, key, "expected constant, stripes or raster");
        }
        else if (key == "coefficient.value")
            cfg.constant_value = to_double(v, line, key);
        else if (key == "stripes.period")
            cfg.stripe_period = to_double(v, line, key);
        else if (key == "stripes.low")
            cfg.stripe_low = to_double(v, line, key);
        else if (key == "stripes.high")
            cfg.stripe_high = to_double(v, line, key);
        else if (key == "stripes.axis")
        {
            if (v != "x" && v != "y")
                bad(line, key, "expected x or y");
            cfg.stripe_axis = v == "x" ? Axis::X : Axis::Y;
        }
        else if (key == "raster.path")
            cfg.raster_path = v;
        else if (key == "forcing")
        {
            if (v != "cosine" && v != "one")
                bad(line, key, "expected cosine or one");
            cfg.forcing = v == "cosine" ? ForcingKind::Cosine : ForcingKind::One;
        }
        else if (key == "fine_level")
            cfg.fine_level = static_cast<int>(to_integer(v, line, key));
        else if (key == "coarse_levels")
        {
            cfg.coarse_levels.clear();
            for (const auto& item : split_list(v))
                cfg.coarse_levels.push_back(static_cast<int>(to_integer(item, line, key)));
        }
        else if (key == "C")
            cfg.C = to_double(v, line, key);
        else if (key == "log_base")
        {
            if (v != "e" && v != "2")
                bad(line, key, "expected e or 2");
            cfg.log_base = v == "2" ? LogBase::Two : LogBase::Natural;
        }
        else if (key == "layers")
            cfg.layers = static_cast<int>(to_integer(v, line, key));
        else if (key == "sweep.C")
        {
            cfg.sweep_constants.clear();
            for (const auto& item : split_list(v))
                cfg.sweep_constants.push_back(to_double(item, line, key));
        }
        else if (key == "sigma0")
            cfg.penalty.sigma0 = to_double(v, line, key);
        else if (key == "penalty")
        {
            if (v != "weighted" && v != "plain")
                bad(line, key, "expected weighted or plain");
            cfg.penalty.mode = v == "weighted" ? PenaltyMode::Weighted : PenaltyMode::Plain;
        }
        else if (key == "rtol")
            cfg.rtol = to_double(v, line, key);
        else if (key == "max_iterations")
            cfg.max_iterations = static_cast<int>(to_integer(v, line, key));
        else if (key == "saddle_rtol")
            cfg.saddle_rtol = to_double(v, line, key);
        else if (key == "svd_tol")
            cfg.svd_tol = to_double(v, line, key);
        else if (key == "qoi")
        {
            cfg.qoi.clear();
            for (const auto& item : split_list(v))
            {
                if (item == "f")
                    cfg.qoi.push_back(QoiKind::Forcing);
                else if (item == "indicator")
                    cfg.qoi.push_back(QoiKind::Indicator);
                else
                    bad(line, key, "unknown functional '" + item + "'");
            }
        }
        else if (key == "qoi.box")
        {
            const auto items = split_list(v);
            if (items.size() != 4)
                bad(line, key, "expected xmin,ymin,xmax,ymax");
            for (int i = 0; i < 4; ++i)
                cfg.indicator_box[i] = to_double(items[i], line, key);
        }
        else if (key == "decay.element")
            cfg.decay_element = static_cast<int>(to_integer(v, line, key));
        else if (key == "decay.index")
            cfg.decay_index = static_cast<int>(to_integer(v, line, key));
        else if (key == "decay.layers")
            cfg.decay_layers = static_cast<int>(to_integer(v, line, key));
        else if (key == "threads")
            cfg.threads = static_cast<int>(to_integer(v, line, key));
        else if (key == "timings")
            cfg.timings = to_bool(v, line, key);
        else if (key == "force_budget")
            cfg.force_budget = to_bool(v, line, key);
        else if (key == "global_budget")
            cfg.global_budget = static_cast<std::size_t>(to_integer(v, line, key));
        else if (key == "cache_dir")
            cfg.cache_dir = v;
        else
            bad(line, key, "unknown key");
    }
    return cfg;
}

StudyConfig StudyConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse(in);
}

std::string StudyConfig::canonical() const
{
    std::vector<std::pair<std::string, std::string>> kv;
    auto num = [](double v) { return format_double(v); };
    auto ints = [](const std::vector<int>& v) {
        std::vector<std::string> s;
        for (int x : v)
            s.push_back(std::to_string(x));
        return join(s);
    };
    kv.emplace_back("domain", domain == DomainKind::LShape ? "l-shape" : "unit-square");
    kv.emplace_back("boundary", mixed_boundary ? "mixed" : "dirichlet");
    kv.emplace_back("coefficient", coefficient == CoefficientKind::Constant  ? "constant"
                                   : coefficient == CoefficientKind::Stripes ? "stripes"
                                                                             : "raster");
    kv.emplace_back("coefficient.value", num(constant_value));
    kv.emplace_back("stripes.period", num(stripe_period));
    kv.emplace_back("stripes.low", num(stripe_low));
    kv.emplace_back("stripes.high", num(stripe_high));
    kv.emplace_back("stripes.axis", stripe_axis == Axis::X ? "x" : "y");
    kv.emplace_back("raster.path", raster_path);
    kv.emplace_back("forcing", forcing == ForcingKind::Cosine ? "cosine" : "one");
    kv.emplace_back("fine_level", std::to_string(fine_level));
    kv.emplace_back("coarse_levels", ints(coarse_levels));
    kv.emplace_back("C", num(C));
    kv.emplace_back("log_base", log_base == LogBase::Two ? "2" : "e");
    kv.emplace_back("layers", std::to_string(layers));
    std::vector<std::string> sc;
    for (double c : sweep_constants)
        sc.push_back(num(c));
    kv.emplace_back("sweep.C", join(sc));
    kv.emplace_back("sigma0", num(penalty.sigma0));
    kv.emplace_back("penalty", penalty.mode == PenaltyMode::Weighted ? "weighted" : "plain");
    kv.emplace_back("rtol", num(rtol));
    kv.emplace_back("max_iterations", std::to_string(max_iterations));
    kv.emplace_back("saddle_rtol", num(saddle_rtol));
    kv.emplace_back("svd_tol", num(svd_tol));
    std::vector<std::string> q;
    for (auto k : qoi)
        q.push_back(qoi_name(k));
    kv.emplace_back("qoi", join(q));
    kv.emplace_back("qoi.box", join({num(indicator_box[0]), num(indicator_box[1]), num(indicator_box[2]),
                                     num(indicator_box[3])}));
    kv.emplace_back("decay.element", std::to_string(decay_element));
    kv.emplace_back("decay.index", std::to_string(decay_index));
    kv.emplace_back("decay.layers", std::to_string(decay_layers));
    kv.emplace_back("threads", std::to_string(threads));
    kv.emplace_back("timings", timings ? "on" : "off");
    kv.emplace_back("force_budget", force_budget ? "on" : "off");
    kv.emplace_back("global_budget", std::to_string(global_budget));
    kv.emplace_back("cache_dir", cache_dir);

    std::string s;
    for (const auto& [k, v] : kv)
        s += k + " = " + v + "\n";
    return s;
}

void StudyConfig::validate() const
{
    const int min_level = domain == DomainKind::LShape ? 1 : 0;
    if (fine_level < 1 || fine_level > kMaxLevel)
        throw ConfigError("fine_level must be in 1.." + std::to_string(kMaxLevel));
    if (coarse_levels.empty())
        throw ConfigError("coarse_levels must not be empty");
    for (int l : coarse_levels)
        if (l < min_level || l >= fine_level)
            throw ConfigError("coarse level " + std::to_string(l) + " must satisfy " + std::to_string(min_level) +
                              " <= level < fine_level");
    if (!(C > 0.0))
        throw ConfigError("C must be positive");
    if (layers < 0)
        throw ConfigError("layers must be >= 0");
    for (double c : sweep_constants)
        if (!(c > 0.0))
            throw ConfigError("sweep constants must be positive");
    if (!(penalty.sigma0 > 0.0))
        throw ConfigError("sigma0 must be positive");
    if (!(rtol > 0.0) || !(saddle_rtol > 0.0))
        throw ConfigError("solver tolerances must be positive");
    if (max_iterations < 1)
        throw ConfigError("max_iterations must be positive");
    if (!(svd_tol >= 0.0))
        throw ConfigError("svd_tol must be nonnegative");
    if (threads < 1)
        throw ConfigError("threads must be >= 1");
    if (decay_index < 0 || decay_index > 3)
        throw ConfigError("decay.index must be in 0..3");
    if (coefficient == CoefficientKind::Raster && raster_path.empty())
        throw ConfigError("coefficient = raster requires raster.path");
}

std::uint64_t config_hash(const StudyConfig& cfg)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : cfg.canonical())
    {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

DomainSpec make_domain(const StudyConfig& cfg)
{
    if (cfg.domain == DomainKind::LShape)
        return cfg.mixed_boundary ? DomainSpec::l_shape_mixed() : DomainSpec::l_shape_dirichlet();
    DomainSpec d = DomainSpec::unit_square_dirichlet();
    if (cfg.mixed_boundary)
        for (auto& s : d.selectors)
            if ((s.axis == Axis::Y && s.value == 0.0) || (s.axis == Axis::X && s.value == 1.0))
                s.tag = BoundaryTag::Neumann;
    return d;
}

Coefficient make_coefficient(const StudyConfig& cfg, const Mesh& fine)
{
    switch (cfg.coefficient)
    {
    case CoefficientKind::Constant:
        return Coefficient::constant(fine, cfg.constant_value);
    case CoefficientKind::Stripes:
        return Coefficient::periodic_stripes(fine, cfg.stripe_period, cfg.stripe_low, cfg.stripe_high, cfg.stripe_axis);
    case CoefficientKind::Raster:
        return Coefficient::load_raster(fine, cfg.raster_path);
    }
    throw ConfigError("unknown coefficient kind");
}

ScalarField make_forcing(const StudyConfig& cfg)
{
    if (cfg.forcing == ForcingKind::One)
        return [](double, double) { return 1.0; };
    return [](double x, double y) {
        return 1.0 + std::cos(2.0 * std::numbers::pi * x) * std::cos(2.0 * std::numbers::pi * y);
    };
}

QoiSpec make_qoi(const StudyConfig& cfg, QoiKind kind)
{
    if (kind == QoiKind::Forcing)
        return {make_forcing(cfg), 6};
    const auto b = cfg.indicator_box;
    // The box edges lie on mesh lines for the supported levels, so a Gauss
    // rule integrates the indicator exactly element by element.
    return {[b](double x, double y) { return (x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3]) ? 1.0 : 0.0; }, 2};
}

MultiscaleOptions make_options(const StudyConfig& cfg)
{
    MultiscaleOptions o;
    o.threads = cfg.threads;
    o.saddle_rtol = cfg.saddle_rtol;
    o.global_budget = cfg.global_budget;
    o.force = cfg.force_budget;
    o.cache_dir = cfg.cache_dir;
    return o;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    double    sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const int m = static_cast<int>(x.size());
    for (int i = 0; i < m; ++i)
    {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

Slopes fit_slopes(const std::vector<StudyRow>& rows)
{
    std::vector<double> n, e, l, c;
    for (const auto& r : rows)
    {
        n.push_back(r.ndof);
        e.push_back(r.err_energy_rel);
        l.push_back(r.err_l2_rel);
        c.push_back(r.err_l2_coarse_rel);
    }
    return {loglog_slope(n, e), loglog_slope(n, l), loglog_slope(n, c)};
}

StudyResult run_convergence_study(const StudyConfig& cfg, const LevelHook& hook)
{
    cfg.validate();
    const DomainSpec  dom = make_domain(cfg);
    const Mesh        fine(dom, cfg.fine_level);
    const Coefficient A = make_coefficient(cfg, fine);
    const Vector      F = assemble_load(fine, make_forcing(cfg));
    const auto        sip = assemble_sip(fine, A, cfg.penalty);
    const auto        ref = solve_reference(fine, sip.matrix, F, {cfg.rtol, cfg.max_iterations});

    StudyResult out;
    for (int level : cfg.coarse_levels)
    {
        const MeshHierarchy     hier(dom, level, cfg.fine_level);
        const MultiscaleProblem prob(hier, A, cfg.penalty);
        const int               L = layers_for(cfg, cfg.C, hier.coarse().width());

        const auto     t0 = std::chrono::steady_clock::now();
        const MsBasis  basis = build_ms_space(prob, L, make_options(cfg));
        const double   tc = seconds_since(t0);
        const auto     t1 = std::chrono::steady_clock::now();
        const MsSolver solver(basis);
        const auto     ms = solver.solve(F);
        const double   ts = seconds_since(t1);

        StudyRow row = level_row(prob, L, ref, ms);
        if (cfg.timings)
        {
            row.t_correctors_s = tc;
            row.t_solve_s = ts;
        }
        out.cache_keys[level] = problem_hash(prob);
        if (hook)
            hook(LevelContext{cfg, prob, basis, solver, ref, ms, row});
        out.rows.push_back(row);
    }
    out.slopes = fit_slopes(out.rows);
    return out;
}

SweepResult run_localization_sweep(const StudyConfig& cfg)
{
    cfg.validate();
    const DomainSpec  dom = make_domain(cfg);
    const Mesh        fine(dom, cfg.fine_level);
    const Coefficient A = make_coefficient(cfg, fine);
    const Vector      F = assemble_load(fine, make_forcing(cfg));
    const auto        sip = assemble_sip(fine, A, cfg.penalty);
    const auto        ref = solve_reference(fine, sip.matrix, F, {cfg.rtol, cfg.max_iterations});

    std::vector<std::vector<SweepRow>> byC(cfg.sweep_constants.size());
    SweepResult                        out;
    for (int level : cfg.coarse_levels)
    {
        const MeshHierarchy     hier(dom, level, cfg.fine_level);
        const MultiscaleProblem prob(hier, A, cfg.penalty);
        out.cache_keys[level] = problem_hash(prob);
        std::map<int, StudyRow> done;  // rows by L: equal radii give equal spaces
        for (std::size_t i = 0; i < cfg.sweep_constants.size(); ++i)
        {
            const int L = layers_for(cfg, cfg.sweep_constants[i], hier.coarse().width());
            if (!done.count(L))
            {
                const auto     t0 = std::chrono::steady_clock::now();
                const MsBasis  basis = build_ms_space(prob, L, make_options(cfg));
                const double   tc = seconds_since(t0);
                const auto     t1 = std::chrono::steady_clock::now();
                const MsSolver solver(basis);
                const auto     ms = solver.solve(F);
                const double   ts = seconds_since(t1);
                StudyRow       row = level_row(prob, L, ref, ms);
                if (cfg.timings)
                {
                    row.t_correctors_s = tc;
                    row.t_solve_s = ts;
                }
                done.emplace(L, row);
            }
            byC[i].push_back({cfg.sweep_constants[i], done.at(L)});
        }
    }
    for (const auto& rows : byC)
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    return out;
}

int central_element(const Mesh& coarse)
{
    int    best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int e = 0; e < static_cast<int>(coarse.num_elements()); ++e)
    {
        const auto   o = coarse.origin(e);
        const double dx = o[0] + 0.5 * coarse.width() - 0.5;
        const double dy = o[1] + 0.5 * coarse.width() - 0.5;
        const double d = dx * dx + dy * dy;
        if (d < bd)
        {
            bd = d;
            best = e;
        }
    }
    return best;
}

DecayResult run_decay_study(const StudyConfig& cfg)
{
    cfg.validate();
    const DomainSpec        dom = make_domain(cfg);
    const int               level = cfg.coarse_levels.front();
    const MeshHierarchy     hier(dom, level, cfg.fine_level);
    const Coefficient       A = make_coefficient(cfg, hier.fine());
    const MultiscaleProblem prob(hier, A, cfg.penalty);

    DecayResult out;
    out.coarse_level = level;
    out.element = cfg.decay_element >= 0 ? cfg.decay_element : central_element(hier.coarse());
    if (out.element >= static_cast<int>(hier.coarse().num_elements()))
        throw ConfigError("decay.element out of range");
    out.index = cfg.decay_index;
    const int K = cfg.decay_layers > 0 ? cfg.decay_layers
                                       : std::max(1, saturation_layers(hier.coarse(), out.element) - 1);
    const Corrector c = global_corrector(prob, out.element, out.index, make_options(cfg));
    out.profile = decay_profile(prob, c, K);
    return out;
}

QoiResult run_qoi_study(const StudyConfig& cfg)
{
    QoiResult                             out;
    std::map<QoiKind, ReferenceSolution>  dual_ref;
    out.study = run_convergence_study(cfg, [&](const LevelContext& ctx) {
        const Mesh& fine = ctx.problem.hierarchy().fine();
        for (QoiKind kind : cfg.qoi)
        {
            const QoiSpec g = make_qoi(cfg, kind);
            if (!dual_ref.count(kind))
                dual_ref.emplace(kind, solve_dual_reference(ctx.problem, g, {cfg.rtol, cfg.max_iterations}));
            const MsSolution dual_ms = solve_dual_msfem(ctx.solver, fine, g);
            QoiRow           row;
            row.H = ctx.row.H;
            row.ndof = ctx.row.ndof;
            row.kind = kind;
            row.bound = qoi_error_bound(ctx.problem, g, ctx.reference.u.coeffs, ctx.ms.u.coeffs,
                                        dual_ref.at(kind).u.coeffs, dual_ms.u.coeffs);
            out.rows.push_back(row);
        }
    });
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string study_csv(const std::vector<StudyRow>& rows)
{
    std::string s = "H,Ndof,L,err_energy_rel,err_l2_rel,err_l2_coarse_rel,t_correctors_s,t_solve_s,iters_ref,iters_ms\n";
    for (const auto& r : rows)
        s += format_double(r.H) + "," + std::to_string(r.ndof) + "," + std::to_string(r.L) + "," +
             format_double(r.err_energy_rel) + "," + format_double(r.err_l2_rel) + "," +
             format_double(r.err_l2_coarse_rel) + "," + format_double(r.t_correctors_s) + "," +
             format_double(r.t_solve_s) + "," + std::to_string(r.iters_ref) + "," + std::to_string(r.iters_ms) + "\n";
    return s;
}

std::vector<StudyRow> parse_study_csv(std::istream& in)
{
    std::vector<StudyRow> rows;
    std::string           line;
    int                   no = 0;
    while (std::getline(in, line))
    {
        ++no;
        if (no == 1 || trim(line).empty())
            continue;
        const auto f = split_list(line);
        if (f.size() != 10)
            throw IngestionError("study.csv: expected 10 fields", no);
        const std::string key = "csv";
        StudyRow          r;
        r.H = to_double(f[0], no, key);
        r.ndof = static_cast<int>(to_integer(f[1], no, key));
        r.L = static_cast<int>(to_integer(f[2], no, key));
        r.err_energy_rel = to_double(f[3], no, key);
        r.err_l2_rel = to_double(f[4], no, key);
        r.err_l2_coarse_rel = to_double(f[5], no, key);
        r.t_correctors_s = to_double(f[6], no, key);
        r.t_solve_s = to_double(f[7], no, key);
        r.iters_ref = static_cast<int>(to_integer(f[8], no, key));
        r.iters_ms = static_cast<int>(to_integer(f[9], no, key));
        rows.push_back(r);
    }
    return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("failed writing " + path.string());
}

void emit_outputs(const std::vector<StudyRow>& rows, const Manifest& manifest, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    write_text(dir / "study.csv", study_csv(rows));

    nlohmann::ordered_json j;
    j["study"] = manifest.study;
    j["version"] = kVersion;
    if (manifest.cfg)
    {
        nlohmann::ordered_json c;
        std::istringstream     in(manifest.cfg->canonical());
        std::string            line;
        while (std::getline(in, line))
        {
            const auto eq = line.find(" = ");
            c[line.substr(0, eq)] = line.substr(eq + 3);
        }
        j["config"] = c;
        j["config_hash"] = hex_key(config_hash(*manifest.cfg));
    }
    nlohmann::ordered_json keys = nlohmann::ordered_json::object();
    for (const auto& [level, key] : manifest.cache_keys)
        keys[std::to_string(level)] = hex_key(key);
    j["corrector_cache_keys"] = keys;
    if (manifest.has_slopes)
        j["slopes"] = {{"err_energy_rel", manifest.slopes.energy},
                       {"err_l2_rel", manifest.slopes.l2},
                       {"err_l2_coarse_rel", manifest.slopes.l2_coarse}};
    for (const auto& [k, v] : manifest.extra)
        j[k] = v;
    write_text(dir / "study.json", j.dump(2) + "\n");

    write_text(dir / "plot.gnuplot",
               "set datafile separator ','\n"
               "set logscale xy\n"
               "set xlabel 'Ndof'\n"
               "set ylabel 'relative error'\n"
               "set key top right\n"
               "plot 'study.csv' using 2:4 every ::1 with linespoints title 'energy', \\\n"
               "     'study.csv' using 2:5 every ::1 with linespoints title 'L2', \\\n"
               "     'study.csv' using 2:6 every ::1 with linespoints title 'L2 coarse part'\n");
}

bool run_verify(const StudyConfig& cfg, std::ostream& out)
{
    bool all = true;
    auto report = [&](const std::string& name, double value, double tol) {
        const bool ok = value <= tol;
        all = all && ok;
        out << (ok ? "PASS " : "FAIL ") << name << "  value=" << format_double(value) << " tol=" << format_double(tol)
            << "\n";
    };

    std::mt19937_64                        rng(20240521);
    std::uniform_real_distribution<double> U(-1.0, 1.0);

    std::vector<TraceSample> samples(10000);
    for (auto& s : samples)
        s = {U(rng), U(rng), U(rng), U(rng), U(rng), U(rng)};
    report("face identities A1-A4", verify_face_identities(samples).max(), 1e-13);

    const DomainSpec        dom = make_domain(cfg);
    const MeshHierarchy     hier(dom, 1, 3);
    const Coefficient       A = make_coefficient(cfg, hier.fine());
    const MultiscaleProblem prob(hier, A, cfg.penalty);
    const SparseMatrix&     K = prob.sip();
    const double            kmax = to_dense(K).cwiseAbs().maxCoeff();
    report("SIP symmetry", to_dense(SparseMatrix(K - SparseMatrix(K.transpose()))).cwiseAbs().maxCoeff() / kmax, 1e-13);

    DGFunction v = DGFunction::zero(hier.fine(), Level::Fine);
    for (Eigen::Index i = 0; i < v.coeffs.size(); ++i)
        v.coeffs[i] = U(rng);
    const DGFunction pc = inject_coarse(prob.map(), project_coarse(prob.map(), v));
    const DGFunction pf = fine_scale_part(prob.map(), v);
    const double     n2 = std::pow(l2_norm(hier.fine(), v.coeffs), 2);
    report("L2 Pythagoras",
           std::abs(n2 - std::pow(l2_norm(hier.fine(), pc.coeffs), 2) - std::pow(l2_norm(hier.fine(), pf.coeffs), 2)) / n2,
           1e-12);
    const DGFunction w = project_coarse(prob.map(), v);
    const DGFunction ww = project_coarse(prob.map(), inject_coarse(prob.map(), w));
    report("projection idempotence", (w.coeffs - ww.coeffs).norm() / w.coeffs.norm(), 1e-12);

    double worst = 0.0;
    for (int T = 0; T < static_cast<int>(hier.coarse().num_elements()); ++T)
        for (int j = 0; j < 4; ++j)
        {
            const Corrector c = corrector(prob, T, j, 1, make_options(cfg));
            worst = std::max(worst, project_coarse(prob.map(), c.phi).coeffs.norm() / c.phi.coeffs.norm());
        }
    report("corrector constraint |Pi_H phi| / |phi|", worst, 1e-10);

    const Vector F = assemble_load(hier.fine(), make_forcing(cfg));
    const auto   ref = solve_reference(hier.fine(), K, F, {1e-12, cfg.max_iterations});
    report("reference Galerkin residual", (K * ref.u.coeffs - F).norm() / F.norm(), 1e-10);
    return all;
}

} // namespace dgms
