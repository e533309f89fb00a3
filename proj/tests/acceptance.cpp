// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "dgms/corrector_cache.hpp"
#include "dgms/errors.hpp"
#include "dgms/study.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace dgms;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what)
{
    std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int workers() { return std::max(1, std::min(4, static_cast<int>(std::thread::hardware_concurrency()))); }

const double kPi = std::acos(-1.0);

double cos_f(double x, double y) { return 1.0 + std::cos(2 * kPi * x) * std::cos(2 * kPi * y); }

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// 1
void identities()
{
    const auto                             t0 = Clock::now();
    std::mt19937                           rng(12345);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<TraceSample>               s(10000);
    for (auto& t : s)
        t = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    const double r = verify_face_identities(s).max();
    const double dt = seconds_since(t0);
    report(1, r < 1e-13 && dt < 1.0, fmt("face identities: max residual %.2e over 1e4 samples (%.3f s)", r, dt));
}

// 2
void oracle_equivalence()
{
    const auto        t0 = Clock::now();
    MeshHierarchy     h(DomainSpec::unit_square_dirichlet(), 1, 2);
    const Mesh&       m = h.fine();
    std::mt19937      rng(7);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    std::vector<double> a(m.num_elements());
    for (auto& x : a)
        x = u(rng);
    const Coefficient A(m, a);
    const PenaltyRule pen;
    MultiscaleProblem prob(h, A, pen);

    const Matrix Kref = oracle::sip(m, a, pen.sigma0, true);
    const double e_sip = max_abs(to_dense(prob.sip()) - Kref) / max_abs(Kref);

    DGFunction v = DGFunction::zero(m, Level::Fine);
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    for (auto& x : v.coeffs)
        x = w(rng);
    const double e_proj = max_abs(project_coarse(prob.map(), v).coeffs - oracle::project(h, v.coeffs));

    const Vector F = assemble_load(m, cos_f);
    const Vector Fref = oracle::load_cos_exact(m);
    const double e_load = max_abs(F - Fref);

    const auto   ref = solve_reference(m, prob.sip(), F, {1e-14, 1000});
    const Vector uref = Kref.fullPivLu().solve(Fref);
    const double e_ref = max_abs(ref.u.coeffs - uref) / max_abs(uref);

    double e_cor = 0;
    for (int L : {1, 2})
    {
        const Corrector c = corrector(prob, 0, 1, L);
        const Vector    o = oracle::corrector(h, Kref, patch_elements(h.coarse(), 0, L), 0, 1);
        e_cor = std::max(e_cor, max_abs(c.phi.coeffs - o) / std::max(1.0, max_abs(o)));
    }
    const double dt = seconds_since(t0);
    const double worst = std::max({e_sip, e_proj, e_load, e_ref, e_cor});
    report(2, worst < 1e-10 && dt < 5.0,
           fmt("dense oracles on 16 elements: sip %.1e, projection %.1e, load %.1e, ", e_sip, e_proj, e_load) +
               fmt("reference %.1e, corrector %.1e (%.2f s)", e_ref, e_cor, dt));
}

// 3, part one: Pythagoras and idempotence on the study hierarchy
struct DecompositionCheck
{
    double pythagoras = 0.0;
    double idempotence = 0.0;
    double constraint = 0.0;  ///< worst ||Pi_H phi|| / ||phi|| over all correctors seen
    long   correctors = 0;
};

void decomposition_invariants(const StudyConfig& cfg, DecompositionCheck& d)
{
    const DomainSpec    dom = make_domain(cfg);
    MeshHierarchy       h(dom, 2, cfg.fine_level);
    const CoarseFineMap map(h);
    std::mt19937        rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DGFunction          v = DGFunction::zero(h.fine(), Level::Fine);
    for (auto& x : v.coeffs)
        x = u(rng);
    const DGFunction pv = inject_coarse(map, project_coarse(map, v));
    const DGFunction ppv = inject_coarse(map, project_coarse(map, pv));
    const DGFunction f = fine_scale_part(map, v);
    const double     a = l2_norm(h.fine(), v.coeffs), b = l2_norm(h.fine(), pv.coeffs),
                 c = l2_norm(h.fine(), f.coeffs);
    d.pythagoras = std::abs(a * a - b * b - c * c) / (a * a);
    d.idempotence = l2_norm(h.fine(), pv.coeffs - ppv.coeffs) / b;
}

// 3, part two: constraint of every corrector of one level, element-locally
void corrector_constraints(const MsBasis& basis, DecompositionCheck& d)
{
    const auto&            map = basis.problem().map();
    const int              n = map.fine_dofs_per_coarse();
    const int              r2 = basis.problem().hierarchy().children_per_element();
    const Eigen::Matrix4d& MH = map.coarse_mass();
    const Eigen::Matrix4d  Mh = MH / r2;  // element mass scales with the area
    for (int T = 0; T < static_cast<int>(basis.problem().hierarchy().coarse().num_elements()); ++T)
    {
        const auto& ec = basis.element(T);
        for (int j = 0; j < 4; ++j)
        {
            double p2 = 0, f2 = 0;
            for (std::size_t k = 0; k < ec.coarse.size(); ++k)
            {
                const Vector          blk = ec.phi.block(static_cast<Eigen::Index>(n * k), j, n, 1);
                const Eigen::Vector4d c = map.projector() * blk;
                p2 += c.dot(MH * c);
                for (int s = 0; s < r2; ++s)
                {
                    const Eigen::Vector4d q = blk.segment<4>(4 * s);
                    f2 += q.dot(Mh * q);
                }
            }
            if (f2 > 0)
                d.constraint = std::max(d.constraint, std::sqrt(std::max(p2, 0.0) / f2));
            ++d.correctors;
        }
    }
}

// 4
void ideal_method()
{
    const auto t0 = Clock::now();
    double     worst = 0;
    for (int cl = 1; cl <= 3; ++cl)
    {
        MeshHierarchy     h(DomainSpec::unit_square_dirichlet(), cl, 5);
        const Coefficient A = Coefficient::constant(h.fine(), 1.0);
        MultiscaleProblem prob(h, A, PenaltyRule{});
        // f = Pi_H f: coarse L2 projection of the forcing, injected
        const Vector   Fc = assemble_load(h.coarse(), cos_f);
        DGFunction     fc = DGFunction::zero(h.coarse(), Level::Coarse);
        const auto     mc = prob.map().coarse_mass().ldlt();
        for (int T = 0; T < static_cast<int>(h.coarse().num_elements()); ++T)
            fc.coeffs.segment<4>(4 * T) = mc.solve(Eigen::Vector4d(Fc.segment<4>(4 * T)));
        const Vector F = assemble_load(h.fine(), inject_coarse(prob.map(), fc));

        const auto ref = solve_reference(h.fine(), prob.sip(), F, {1e-14, 50000});
        MultiscaleOptions opts;
        opts.threads = workers();
        const MsBasis  b = build_ms_space(prob, kSaturate, opts);
        const auto     ms = MsSolver(b).solve(F);
        const double   e = energy_norm(h.fine(), ref.u.coeffs - ms.u.coeffs, A, prob.penalty()) /
                         energy_norm(h.fine(), ref.u.coeffs, A, prob.penalty());
        worst = std::max(worst, e);
    }
    const double dt = seconds_since(t0);
    report(4, worst <= 1e-8 && dt < 60.0,
           fmt("ideal method with f = Pi_H f, coarse 1-3, fine 5: worst relative energy error %.2e (%.1f s)", worst,
               dt));
}

// 7
void localization_sweep()
{
    const auto  t0 = Clock::now();
    StudyConfig cfg;
    cfg.fine_level = 6;
    cfg.coarse_levels = {2, 3, 4};
    cfg.threads = workers();
    cfg.timings = false;
    const SweepResult s = run_localization_sweep(cfg);

    bool        monotone = true;
    std::string detail;
    for (int cl : cfg.coarse_levels)
    {
        const double H = std::ldexp(1.0, -cl);
        double       prev = 1e300;
        for (const auto& r : s.rows)
            if (r.row.H == H)
            {
                monotone = monotone && r.row.err_energy_rel <= prev + 1e-12;
                prev = r.row.err_energy_rel;
                detail += fmt(" %g:%.2e", r.C, r.row.err_energy_rel);
            }
        detail += " |";
    }
    const double Hf = std::ldexp(1.0, -cfg.coarse_levels.back());
    double       e2 = 0, e25 = 0;
    for (const auto& r : s.rows)
        if (r.row.H == Hf)
        {
            if (r.C == 2.0)
                e2 = r.row.err_energy_rel;
            if (r.C == 2.5)
                e25 = r.row.err_energy_rel;
        }
    const double gap = std::abs(e25 - e2) / e2;
    report(7, monotone && gap <= 0.25,
           std::string("localization sweep, fine 6: errors ") + (monotone ? "nonincreasing" : "NOT monotone") +
               fmt(" in C, gap(2, 5/2) at H=1/16 = %.3f (%.1f s); C:err per H", gap, seconds_since(t0)) + detail);
}

// 8
void decay()
{
    const auto t0 = Clock::now();
    bool       ok = true;
    std::string detail;
    for (bool stripes : {false, true})
    {
        StudyConfig cfg;
        cfg.domain = DomainKind::UnitSquare;
        cfg.mixed_boundary = false;
        cfg.fine_level = 6;
        cfg.coarse_levels = {4};
        if (stripes)
        {
            cfg.coefficient = CoefficientKind::Stripes;
            cfg.stripe_period = 1.0 / 32.0;
        }
        const DecayResult d = run_decay_study(cfg);
        bool              mono = true;
        for (std::size_t i = 1; i < d.profile.tail.size(); ++i)
            mono = mono && d.profile.tail[i] <= d.profile.tail[i - 1];
        const bool has = d.profile.gamma.has_value();
        ok = ok && mono && has && *d.profile.gamma < 1.0;
        detail += std::string(stripes ? " A2" : " A1") +
                  fmt(" gamma = %.3f over %g tails,", has ? *d.profile.gamma : NAN,
                      static_cast<double>(d.profile.tail.size())) +
                  (mono ? " nonincreasing;" : " NOT monotone;");
    }
    report(8, ok, "decay at H=1/16, h=1/64:" + detail + fmt(" (%.1f s)", seconds_since(t0)));
}

// 11
void high_contrast()
{
    const auto  t0 = Clock::now();
    StudyConfig cfg;
    cfg.coefficient = CoefficientKind::Stripes;
    cfg.threads = workers();
    cfg.timings = false;
    const StudyResult r = run_convergence_study(cfg);
    std::string       errs;
    for (const auto& row : r.rows)
        errs += fmt(" %.2e", row.err_energy_rel);
    report(11, r.slopes.energy <= -1.2,
           fmt("A2 study: energy slope %.3f (need <= -1.2), errors", r.slopes.energy) + errs +
               fmt(" (%.1f s)", seconds_since(t0)));
}

} // namespace

int main()
{
    try
    {
        identities();
        oracle_equivalence();

        // The A1 study serves criteria 3, 5, 6, 9, 10 and 12.
        StudyConfig cfg;
        cfg.threads = workers();
        cfg.timings = false;

        DecompositionCheck dec;
        decomposition_invariants(cfg, dec);

        double compressed_excess = -1e300;  // max of err_w - err_ms
        double compressed_err = 0, plain_err = 0;
        bool   qoi_ok = true;
        double qoi_ratio = 0;
        std::vector<std::string> qoi_detail;
        std::map<QoiKind, Vector> dual_ref;

        const auto  t5 = Clock::now();
        const auto  study = run_convergence_study(cfg, [&](const LevelContext& ctx) {
            corrector_constraints(ctx.basis, dec);

            const Mesh&  fine = ctx.problem.hierarchy().fine();
            const Vector F = assemble_load(fine, make_forcing(cfg));
            const auto   cb = compress_space(ctx.basis, 0.0);
            const auto   w = solve_compressed(cb, F, {1e-13, cfg.max_iterations});
            const double ew = energy_norm(fine, ctx.reference.u.coeffs - w.w.coeffs, ctx.problem.coefficient(),
                                          ctx.problem.penalty());
            const double em = energy_norm(fine, ctx.reference.u.coeffs - ctx.ms.u.coeffs,
                                          ctx.problem.coefficient(), ctx.problem.penalty());
            if (ew - em > compressed_excess)
            {
                compressed_excess = ew - em;
                compressed_err = ew;
                plain_err = em;
            }

            for (QoiKind kind : cfg.qoi)
            {
                const QoiSpec g = make_qoi(cfg, kind);
                if (!dual_ref.count(kind))
                    dual_ref.emplace(kind,
                                     solve_dual_reference(ctx.problem, g, {cfg.rtol, cfg.max_iterations}).u.coeffs);
                const auto dms = solve_dual_msfem(ctx.solver, fine, g);
                const auto b = qoi_error_bound(ctx.problem, g, ctx.reference.u.coeffs, ctx.ms.u.coeffs,
                                               dual_ref.at(kind), dms.u.coeffs);
                qoi_ok = qoi_ok && b.holds(1e-8);
                qoi_ratio = std::max(qoi_ratio, b.product_bound > 0 ? b.exact_gap / b.product_bound : INFINITY);
                qoi_detail.push_back(fmt("H=%g ", ctx.row.H) + (kind == QoiKind::Forcing ? "f" : "box") +
                                     fmt(" %.3g", b.exact_gap / b.product_bound));
            }
        });
        const double t_study = seconds_since(t5);

        report(3, dec.pythagoras <= 1e-12 && dec.idempotence <= 1e-12 && dec.constraint <= 1e-10,
               fmt("decomposition: Pythagoras %.1e, idempotence %.1e, worst corrector ||Pi_H phi||/||phi|| %.1e", dec.pythagoras,
                   dec.idempotence, dec.constraint) +
                   " over " + std::to_string(dec.correctors) + " correctors");

        ideal_method();

        std::string errs;
        for (const auto& r : study.rows)
            errs += fmt(" %.2e", r.err_energy_rel);
        report(5, study.slopes.energy >= -1.7 && study.slopes.energy <= -1.3,
               fmt("A1 energy slope %.3f vs N_dof (need [-1.7, -1.3]), errors", study.slopes.energy) + errs +
                   fmt(" (study %.1f s, %.0f workers)", t_study, workers()));

        std::string l2;
        for (const auto& r : study.rows)
            l2 += fmt(" %.2e", r.err_l2_rel);
        report(6, study.slopes.l2 >= -2.3 && study.slopes.l2 <= -1.75 && study.slopes.l2_coarse < -0.5,
               fmt("A1 L2 slope %.3f (need [-2.3, -1.75]), coarse-part slope %.3f (need < -0.5), errors",
                   study.slopes.l2, study.slopes.l2_coarse) +
                   l2);

        localization_sweep();
        decay();

        report(9, compressed_excess <= 1e-9,
               fmt("compressed, svd_tol 0: worst excess err_w - err_ms = %.2e (err_w %.4e, err_ms %.4e)",
                   compressed_excess, compressed_err, plain_err));

        std::string qd;
        for (const auto& s : qoi_detail)
            qd += " " + s + ";";
        report(10, qoi_ok, fmt("QoI product bound, worst gap/bound = %.4f:", qoi_ratio) + qd);

        high_contrast();

        const auto  t12 = Clock::now();
        const auto  again = run_convergence_study(cfg);
        const bool  same = study_csv(again.rows) == study_csv(study.rows);
        report(12, same, std::string("repeat of the A1 study: CSV ") + (same ? "bit-identical" : "DIFFERS") +
                             fmt(" (%.1f s)", seconds_since(t12)));
    }
    catch (const std::exception& e)
    {
        std::printf("FAIL    aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
