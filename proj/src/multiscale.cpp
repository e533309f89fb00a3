#include "dgms/multiscale.hpp"

#include "dgms/corrector_cache.hpp"
#include "dgms/errors.hpp"
#include "dgms/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace dgms {

namespace {

bool same_matrix(const SparseMatrix& a, const SparseMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros())
        return false;
    const auto nnz = static_cast<std::size_t>(a.nonZeros());
    return std::memcmp(a.outerIndexPtr(), b.outerIndexPtr(), sizeof(int) * (a.rows() + 1)) == 0 &&
           std::memcmp(a.innerIndexPtr(), b.innerIndexPtr(), sizeof(int) * nnz) == 0 &&
           std::memcmp(a.valuePtr(), b.valuePtr(), sizeof(double) * nnz) == 0;
}

// Patches that are translates of each other under a periodic coefficient give
// bit-identical local systems; their factorization is computed once.
class FactorCache
{
public:
    explicit FactorCache(std::size_t capacity)
        : capacity_(capacity)
    {}

    std::shared_ptr<const SaddleSolver> get(const SparseMatrix& K, const SparseMatrix& C, double rtol)
    {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].constraints == C.rows() && same_matrix(entries_[i].K, K))
            {
                std::rotate(entries_.begin() + i, entries_.begin() + i + 1, entries_.end());
                return entries_.back().solver;
            }
        auto solver = std::make_shared<const SaddleSolver>(SaddleSystem{K, C}, rtol);
        if (entries_.size() == capacity_)
            entries_.erase(entries_.begin());
        entries_.push_back({K, C.rows(), solver});
        return solver;
    }

private:
    struct Entry
    {
        SparseMatrix                        K;
        Eigen::Index                        constraints;
        std::shared_ptr<const SaddleSolver> solver;
    };

    std::size_t        capacity_;
    std::vector<Entry> entries_;
};

ElementCorrectors solve_element(const MultiscaleProblem& prob, int T, int L, const MultiscaleOptions& opts,
                                FactorCache* cache)
{
    const auto& hier = prob.hierarchy();
    if (T < 0 || T >= static_cast<int>(hier.coarse().num_elements()))
        throw ConfigError("coarse element " + std::to_string(T) + " out of range");
    const Patch p = patch(hier, T, L);

    const std::size_t system = p.num_dofs() + 4 * p.coarse.size();
    if (L == kSaturate && system > opts.global_budget && !opts.force)
        throw ConfigError("global corrector system has " + std::to_string(system) + " unknowns, above the budget of " +
                          std::to_string(opts.global_budget) + " (force to override)");

    const SipParts     parts = assemble_sip_parts(hier, p, prob.coefficient(), prob.penalty());
    const SparseMatrix K = parts.total();
    const SparseMatrix E = parts.energy();
    const SparseMatrix C = constraint_matrix(prob.map(), p);

    std::shared_ptr<const SaddleSolver> solver =
        cache ? cache->get(K, C, opts.saddle_rtol) : std::make_shared<const SaddleSolver>(SaddleSystem{K, C}, opts.saddle_rtol);

    const int  n = prob.map().fine_dofs_per_coarse();
    const auto pos = std::lower_bound(p.coarse.begin(), p.coarse.end(), T) - p.coarse.begin();

    ElementCorrectors out;
    out.T = T;
    out.layers = L;
    out.coarse = p.coarse;
    out.phi.resize(static_cast<Eigen::Index>(p.num_dofs()), 4);
    const Vector zero = Vector::Zero(C.rows());
    for (int j = 0; j < 4; ++j)
    {
        Vector lam = Vector::Zero(static_cast<Eigen::Index>(p.num_dofs()));
        lam.segment(pos * n, n) = prob.map().injection().col(j);
        SaddleSolution sol;
        try
        {
            sol = solver->solve(K * lam, zero);
        }
        catch (const NumericalError& e)
        {
            throw NumericalError("corrector T=" + std::to_string(T) + " j=" + std::to_string(j) + ": " + e.what(),
                                 e.residual());
        }
        out.phi.col(j) = sol.x;
        out.residual = std::max(out.residual, sol.residual);
        out.refinements = std::max(out.refinements, sol.refinements);
        const Vector psi = lam - sol.x;
        out.energy[j] = std::sqrt(std::max(psi.dot(E * psi), 0.0));
    }
    return out;
}

Vector scatter_patch(const MeshHierarchy& hier, const std::vector<int>& coarse, const Vector& local)
{
    Vector out = Vector::Zero(static_cast<Eigen::Index>(hier.fine().num_dofs()));
    int    pos = 0;
    for (int c : coarse)
        for (int t : hier.children(c))
        {
            out.segment<4>(4 * t) = local.segment<4>(4 * pos);
            ++pos;
        }
    return out;
}

} // namespace

MultiscaleProblem::MultiscaleProblem(const MeshHierarchy& hier, const Coefficient& A, const PenaltyRule& pen)
    : hier_(&hier), A_(&A), pen_(pen), map_(hier), sip_(assemble_sip(hier.fine(), A, pen).matrix)
{}

int localization_layers(double C, double H, LogBase base)
{
    if (!(C > 0.0))
        throw ConfigError("localization constant C must be positive");
    if (!(H > 0.0) || H > 1.0)
        throw ConfigError("coarse mesh width must lie in (0, 1]");
    const double lg = base == LogBase::Two ? std::log2(1.0 / H) : std::log(1.0 / H);
    return std::max(1, static_cast<int>(std::ceil(C * lg)));
}

ElementCorrectors element_correctors(const MultiscaleProblem& prob, int T, int L, const MultiscaleOptions& opts)
{
    return solve_element(prob, T, L, opts, nullptr);
}

Corrector corrector(const MultiscaleProblem& prob, int T, int j, int L, const MultiscaleOptions& opts)
{
    if (j < 0 || j > 3)
        throw ConfigError("local basis index must be in 0..3");
    const ElementCorrectors ec = solve_element(prob, T, L, opts, nullptr);
    Corrector               c;
    c.T = T;
    c.j = j;
    c.layers = L;
    c.phi.level = Level::Fine;
    c.phi.coeffs = scatter_patch(prob.hierarchy(), ec.coarse, ec.phi.col(j));
    c.residual = ec.residual;
    return c;
}

Corrector global_corrector(const MultiscaleProblem& prob, int T, int j, const MultiscaleOptions& opts)
{
    return corrector(prob, T, j, kSaturate, opts);
}

MsBasis::MsBasis(const MultiscaleProblem& prob, int layers, std::vector<ElementCorrectors> correctors)
    : prob_(&prob), layers_(layers), correctors_(std::move(correctors))
{
    const auto& hier = prob.hierarchy();
    if (correctors_.size() != hier.coarse().num_elements())
        throw ConfigError("corrected basis needs correctors for every coarse element");
    covering_.assign(correctors_.size(), {});
    for (std::size_t T = 0; T < correctors_.size(); ++T)
        for (int c : correctors_[T].coarse)
            covering_[c].push_back(static_cast<int>(T));
}

Eigen::Vector4d MsBasis::corrector_values(int T, int j, int fine_element) const
{
    const auto& hier = prob_->hierarchy();
    const auto& ec = correctors_[T];
    const int   P = hier.parent(fine_element);
    const auto  it = std::lower_bound(ec.coarse.begin(), ec.coarse.end(), P);
    if (it == ec.coarse.end() || *it != P)
        return Eigen::Vector4d::Zero();
    const auto local = (it - ec.coarse.begin()) * hier.children_per_element() + hier.child_slot(fine_element);
    return ec.phi.block<4, 1>(4 * local, j);
}

Eigen::Vector4d MsBasis::local_values(int T, int j, int fine_element) const
{
    const auto&     hier = prob_->hierarchy();
    Eigen::Vector4d v = -corrector_values(T, j, fine_element);
    if (hier.parent(fine_element) == T)
        v += prob_->map().injection().block<4, 1>(4 * hier.child_slot(fine_element), j);
    return v;
}

DGFunction MsBasis::column(int c) const
{
    Vector coeffs = Vector::Zero(columns());
    coeffs[c] = 1.0;
    return reconstruct(coeffs);
}

DGFunction MsBasis::reconstruct(const Vector& coeffs) const
{
    const auto& hier = prob_->hierarchy();
    if (coeffs.size() != columns())
        throw ConfigError("coefficient vector does not match the corrected basis");
    DGFunction u = DGFunction::zero(hier.fine(), Level::Fine);
    const int  n = prob_->map().fine_dofs_per_coarse();
    for (std::size_t T = 0; T < correctors_.size(); ++T)
    {
        const auto&           ec = correctors_[T];
        const Eigen::Vector4d c = coeffs.segment<4>(4 * T);
        const Vector          local = prob_->map().injection() * c;
        for (int t : hier.children(static_cast<int>(T)))
            u.coeffs.segment<4>(4 * t) += local.segment<4>(4 * hier.child_slot(t));
        const Vector corr = ec.phi * c;
        for (std::size_t k = 0; k < ec.coarse.size(); ++k)
        {
            const auto& kids = hier.children(ec.coarse[k]);
            for (std::size_t s = 0; s < kids.size(); ++s)
                u.coeffs.segment<4>(4 * kids[s]) -= corr.segment<4>(static_cast<Eigen::Index>(n * k + 4 * s));
        }
    }
    return u;
}

std::vector<double> MsBasis::stability_norms() const
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(columns()));
    for (const auto& ec : correctors_)
        for (int j = 0; j < 4; ++j)
            out.push_back(ec.energy[j]);
    return out;
}

MsBasis build_ms_space(const MultiscaleProblem& prob, int L, const MultiscaleOptions& opts)
{
    const int                      nT = static_cast<int>(prob.hierarchy().coarse().num_elements());
    const int                      workers = std::max(1, opts.threads);
    std::vector<ElementCorrectors> out(nT);
    std::vector<FactorCache>       caches(workers, FactorCache(4));
    std::optional<CorrectorCache>  disk;
    if (!opts.cache_dir.empty())
        disk.emplace(opts.cache_dir, problem_hash(prob));
    parallel_for(nT, workers, [&](int worker, int T) {
        if (disk)
            if (auto hit = disk->load(T, L))
            {
                out[T] = std::move(*hit);
                return;
            }
        out[T] = solve_element(prob, T, L, opts, &caches[worker]);
        if (disk)
            disk->store(out[T]);
    });
    return MsBasis(prob, L, std::move(out));
}

MsSolver::MsSolver(const MsBasis& basis)
    : basis_(&basis)
{
    const auto&        prob = basis.problem();
    const auto&        hier = prob.hierarchy();
    const Mesh&        fine = hier.fine();
    const SparseMatrix& K = prob.sip();
    const int          nT = static_cast<int>(hier.coarse().num_elements());
    const int          n = prob.map().fine_dofs_per_coarse();

    stiffness_ = Matrix::Zero(basis.columns(), basis.columns());
    std::vector<int> slot(fine.num_elements(), -1);
    for (int Tp = 0; Tp < nT; ++Tp)
    {
        const auto&      S = basis.covering(Tp);
        const auto&      kids = hier.children(Tp);
        std::vector<int> nb(kids.begin(), kids.end());
        for (int t : kids)
            slot[t] = 0;
        std::vector<int> outside;
        for (int t : kids)
            for (int f : fine.element_faces(t))
            {
                const Face& face = fine.face(f);
                const int   o = face.minus == t ? face.plus : face.minus;
                if (o >= 0 && slot[o] < 0)
                {
                    slot[o] = 0;
                    outside.push_back(o);
                }
            }
        std::sort(outside.begin(), outside.end());
        nb.insert(nb.end(), outside.begin(), outside.end());
        for (std::size_t i = 0; i < nb.size(); ++i)
            slot[nb[i]] = static_cast<int>(i);

        // Columns: every basis function living somewhere on N, since face terms
        // couple T' to functions supported only on a neighbour.
        std::vector<int> cols;
        for (int t : nb)
        {
            const auto& c = basis.covering(hier.parent(t));
            cols.insert(cols.end(), c.begin(), c.end());
        }
        std::sort(cols.begin(), cols.end());
        cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

        Matrix psi(static_cast<Eigen::Index>(4 * nb.size()), static_cast<Eigen::Index>(4 * cols.size()));
        for (std::size_t i = 0; i < nb.size(); ++i)
            for (std::size_t s = 0; s < cols.size(); ++s)
                for (int j = 0; j < 4; ++j)
                    psi.block<4, 1>(4 * i, 4 * s + j) = basis.local_values(cols[s], j, nb[i]);
        // Rows only need the functions supported on T' itself.
        Matrix rows(n, static_cast<Eigen::Index>(4 * S.size()));
        for (std::size_t s = 0; s < S.size(); ++s)
            for (std::size_t c = 0; c < kids.size(); ++c)
                for (int j = 0; j < 4; ++j)
                    rows.block<4, 1>(4 * c, 4 * s + j) = basis.local_values(S[s], j, kids[c]);

        Matrix kdn = Matrix::Zero(n, psi.rows());
        for (int r = 0; r < n; ++r)
        {
            const int row = 4 * kids[r / 4] + r % 4;
            for (SparseMatrix::InnerIterator it(K, row); it; ++it)
            {
                const int col = static_cast<int>(it.col());
                kdn(r, 4 * slot[col / 4] + col % 4) = it.value();
            }
        }
        const Matrix z = kdn * psi;
        const Matrix g = rows.transpose() * z;
        for (std::size_t a = 0; a < S.size(); ++a)
            for (std::size_t b = 0; b < cols.size(); ++b)
                stiffness_.block<4, 4>(4 * S[a], 4 * cols[b]) += g.block<4, 4>(4 * a, 4 * b);

        for (int t : nb)
            slot[t] = -1;
    }
    stiffness_ = 0.5 * (stiffness_ + stiffness_.transpose()).eval();

    llt_.compute(stiffness_);
    if (llt_.info() != Eigen::Success)
        throw NumericalError("multiscale stiffness is not positive definite", 0.0);
    rcond_ = llt_.rcond();
    if (!(rcond_ > 1e-15))
        throw NumericalError("multiscale stiffness is ill-conditioned (reciprocal condition estimate " +
                                 std::to_string(rcond_) + ")",
                             rcond_);
}

MsSolution MsSolver::solve(const Vector& fine_load) const
{
    const Vector F = restrict_to_basis(*basis_, fine_load);
    MsSolution   out;
    out.coarse = llt_.solve(F);
    const double fn = F.norm();
    Vector       r = F - stiffness_ * out.coarse;
    out.residual = fn > 0.0 ? r.norm() / fn : 0.0;
    for (int step = 0; step < 3 && out.residual > 1e-15; ++step)
    {
        out.coarse += llt_.solve(r);
        r = F - stiffness_ * out.coarse;
        out.residual = r.norm() / fn;
        out.refinements = step + 1;
    }
    out.u = basis_->reconstruct(out.coarse);
    return out;
}

Vector restrict_to_basis(const MsBasis& basis, const Vector& fine)
{
    const auto& hier = basis.problem().hierarchy();
    if (fine.size() != static_cast<Eigen::Index>(hier.fine().num_dofs()))
        throw ConfigError("fine vector does not match the fine mesh");
    const int nT = static_cast<int>(hier.coarse().num_elements());
    const int n = basis.problem().map().fine_dofs_per_coarse();
    Vector    out(basis.columns());
    Vector    local(n);
    for (int T = 0; T < nT; ++T)
    {
        const auto& ec = basis.element(T);
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        for (std::size_t k = 0; k < ec.coarse.size(); ++k)
        {
            const auto& kids = hier.children(ec.coarse[k]);
            for (std::size_t s = 0; s < kids.size(); ++s)
                local.segment<4>(4 * s) = fine.segment<4>(4 * kids[s]);
            acc -= ec.phi.middleRows(static_cast<Eigen::Index>(n * k), n).transpose() * local;
            if (ec.coarse[k] == T)
                acc += basis.problem().map().injection().transpose() * local;
        }
        out.segment<4>(4 * T) = acc;
    }
    return out;
}

MsSolution solve_msfem(const MsBasis& basis, const ScalarField& f, int quadrature_points)
{
    const MsSolver solver(basis);
    return solver.solve(assemble_load(basis.problem().hierarchy().fine(), f, quadrature_points));
}

MsSolution solve_ideal_msfem(const MultiscaleProblem& prob, const ScalarField& f, const MultiscaleOptions& opts)
{
    const MsBasis basis = build_ms_space(prob, kSaturate, opts);
    return solve_msfem(basis, f);
}

DecayProfile decay_profile(const MultiscaleProblem& prob, const Corrector& c, int K)
{
    const auto& hier = prob.hierarchy();
    const Mesh& fine = hier.fine();
    if (K < 1)
        throw ConfigError("decay profile needs K >= 1");
    const auto contrib = energy_contributions(fine, c.phi.coeffs, prob.coefficient(), prob.penalty());

    DecayProfile out;
    std::vector<char> inside(hier.coarse().num_elements(), 0);
    for (int k = 1; k <= K; ++k)
    {
        std::fill(inside.begin(), inside.end(), 0);
        for (int e : patch_elements(hier.coarse(), c.T, k))
            inside[e] = 1;
        auto outside = [&](int t) { return t >= 0 && !inside[hier.parent(t)]; };
        double s = 0.0;
        for (int t = 0; t < static_cast<int>(fine.num_elements()); ++t)
            if (outside(t))
                s += contrib.element[t];
        for (int f = 0; f < static_cast<int>(fine.num_faces()); ++f)
            if (outside(fine.face(f).minus) || outside(fine.face(f).plus))
                s += contrib.face[f];
        out.k.push_back(k);
        out.tail.push_back(std::sqrt(s));
    }
    const auto positive = std::count_if(out.tail.begin(), out.tail.end(), [](double t) { return t > 0.0; });
    if (positive >= 3)
        out.gamma = fit_decay_rate(out);
    return out;
}

double fit_decay_rate(const DecayProfile& profile)
{
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int    m = 0;
    for (std::size_t i = 0; i < profile.k.size(); ++i)
    {
        if (!(profile.tail[i] > 0.0))
            continue;
        const double x = profile.k[i], y = std::log(profile.tail[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 3)
        throw ConfigError("decay fit needs at least 3 layers with a positive tail, got " + std::to_string(m));
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return std::exp(slope);
}

} // namespace dgms
