#include "dgms/errors.hpp"
#include "dgms/study.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

struct Common
{
    std::string config;
    std::string out = "out";
    int         threads = 0;
    bool        force_budget = false;
};

dgms::StudyConfig load_config(const Common& c)
{
    dgms::StudyConfig cfg = c.config.empty() ? dgms::StudyConfig{} : dgms::StudyConfig::load(c.config);
    if (c.threads > 0)
        cfg.threads = c.threads;
    if (c.force_budget)
        cfg.force_budget = true;
    cfg.validate();
    return cfg;
}

void print_rows(const std::vector<dgms::StudyRow>& rows)
{
    std::cout << dgms::study_csv(rows);
}

int cmd_reference(const Common& c)
{
    const auto cfg = load_config(c);
    const auto dom = dgms::make_domain(cfg);
    const dgms::Mesh fine(dom, cfg.fine_level);
    const auto A = dgms::make_coefficient(cfg, fine);
    const auto sip = dgms::assemble_sip(fine, A, cfg.penalty);
    const auto F = dgms::assemble_load(fine, dgms::make_forcing(cfg));
    const auto ref = dgms::solve_reference(fine, sip.matrix, F, {cfg.rtol, cfg.max_iterations});

    dgms::Manifest m;
    m.study = "reference";
    m.cfg = &cfg;
    m.extra["fine_dofs"] = std::to_string(fine.num_dofs());
    m.extra["iterations"] = std::to_string(ref.stats.iterations);
    m.extra["relative_residual"] = dgms::format_double(ref.stats.relative_residual);
    m.extra["energy_norm"] = dgms::format_double(dgms::energy_norm(fine, ref.u.coeffs, A, cfg.penalty));
    m.extra["l2_norm"] = dgms::format_double(dgms::l2_norm(fine, ref.u.coeffs));
    dgms::emit_outputs({}, m, c.out);
    for (const auto& [k, v] : m.extra)
        std::cout << k << " = " << v << "\n";
    return 0;
}

int cmd_convergence(const Common& c, bool single)
{
    auto cfg = load_config(c);
    if (single)
        cfg.coarse_levels.resize(1);
    const auto r = dgms::run_convergence_study(cfg);
    dgms::Manifest m;
    m.study = single ? "msfem" : "convergence";
    m.cfg = &cfg;
    m.cache_keys = r.cache_keys;
    m.slopes = r.slopes;
    m.has_slopes = r.rows.size() >= 2;
    dgms::emit_outputs(r.rows, m, c.out);
    print_rows(r.rows);
    if (m.has_slopes)
        std::cout << "slopes: energy " << r.slopes.energy << "  l2 " << r.slopes.l2 << "  l2 coarse "
                  << r.slopes.l2_coarse << "\n";
    return 0;
}

int cmd_localization(const Common& c)
{
    const auto cfg = load_config(c);
    const auto r = dgms::run_localization_sweep(cfg);
    std::vector<dgms::StudyRow> rows;
    std::string csv = "C,H,Ndof,L,err_energy_rel,err_l2_rel\n";
    for (const auto& s : r.rows)
    {
        rows.push_back(s.row);
        csv += dgms::format_double(s.C) + "," + dgms::format_double(s.row.H) + "," + std::to_string(s.row.ndof) + "," +
               std::to_string(s.row.L) + "," + dgms::format_double(s.row.err_energy_rel) + "," +
               dgms::format_double(s.row.err_l2_rel) + "\n";
    }
    dgms::Manifest m;
    m.study = "localization";
    m.cfg = &cfg;
    m.cache_keys = r.cache_keys;
    dgms::emit_outputs(rows, m, c.out);
    dgms::write_text(std::filesystem::path(c.out) / "localization.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_decay(const Common& c)
{
    const auto cfg = load_config(c);
    const auto r = dgms::run_decay_study(cfg);
    std::string csv = "k,tail\n";
    for (std::size_t i = 0; i < r.profile.k.size(); ++i)
        csv += std::to_string(r.profile.k[i]) + "," + dgms::format_double(r.profile.tail[i]) + "\n";
    dgms::Manifest m;
    m.study = "decay";
    m.cfg = &cfg;
    m.extra["element"] = std::to_string(r.element);
    m.extra["index"] = std::to_string(r.index);
    m.extra["gamma"] = r.profile.gamma ? dgms::format_double(*r.profile.gamma) : "unavailable";
    dgms::emit_outputs({}, m, c.out);
    dgms::write_text(std::filesystem::path(c.out) / "decay.csv", csv);
    std::cout << csv << "gamma = " << m.extra["gamma"] << "\n";
    return 0;
}

int cmd_qoi(const Common& c)
{
    const auto cfg = load_config(c);
    const auto r = dgms::run_qoi_study(cfg);
    std::string csv = "H,Ndof,g,exact_gap,error_primal,error_dual,product_bound,holds\n";
    bool all = true;
    for (const auto& q : r.rows)
    {
        all = all && q.bound.holds();
        csv += dgms::format_double(q.H) + "," + std::to_string(q.ndof) + "," +
               (q.kind == dgms::QoiKind::Forcing ? "f" : "indicator") + "," + dgms::format_double(q.bound.exact_gap) +
               "," + dgms::format_double(q.bound.error_primal) + "," + dgms::format_double(q.bound.error_dual) + "," +
               dgms::format_double(q.bound.product_bound) + "," + (q.bound.holds() ? "1" : "0") + "\n";
    }
    dgms::Manifest m;
    m.study = "qoi";
    m.cfg = &cfg;
    m.cache_keys = r.study.cache_keys;
    m.slopes = r.study.slopes;
    m.has_slopes = r.study.rows.size() >= 2;
    m.extra["qoi_inequality"] = all ? "holds" : "violated";
    dgms::emit_outputs(r.study.rows, m, c.out);
    dgms::write_text(std::filesystem::path(c.out) / "qoi.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_verify(const Common& c)
{
    auto cfg = load_config(c);
    return dgms::run_verify(cfg, std::cout) ? 0 : 3;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"dG multiscale method: reference solves, corrector studies and error estimation"};
    app.require_subcommand(1);

    Common common;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"reference", "solve the fine-scale dG problem"},
        {"msfem", "multiscale solve on the first coarse level"},
        {"convergence", "convergence study over the coarse levels"},
        {"localization", "sweep of the localization constant C"},
        {"decay", "decay of one global corrector away from its element"},
        {"qoi", "goal-oriented error bounds"},
        {"verify", "run the invariant suite on a small problem"}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands)
    {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--config", common.config, "key = value configuration file");
        s->add_option("--out", common.out, "output directory")->capture_default_str();
        s->add_option("--threads", common.threads, "worker threads for corrector problems");
        s->add_flag("--force-budget", common.force_budget, "allow global corrector problems above the budget");
        subs.push_back(s);
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "reference")
            return cmd_reference(common);
        if (name == "msfem")
            return cmd_convergence(common, true);
        if (name == "convergence")
            return cmd_convergence(common, false);
        if (name == "localization")
            return cmd_localization(common);
        if (name == "decay")
            return cmd_decay(common);
        if (name == "qoi")
            return cmd_qoi(common);
        return cmd_verify(common);
    }
    catch (const dgms::ConfigError& e)
    {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }
    catch (const dgms::IngestionError& e)
    {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    }
    catch (const dgms::NumericalError& e)
    {
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
        return 3;
    }
}
