#ifndef DQUAD_DESIGNER_HPP
#define DQUAD_DESIGNER_HPP

#include "dquad/gauss_newton.hpp"
#include "dquad/moment_system.hpp"
#include "dquad/sparse_grid.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

namespace dquad {

/// A finished rule. Nodes are in user coordinates; bounds (box domains only)
/// give the affine map onto the reference box of the basis.
struct QuadratureRule
{
    std::size_t dim = 0;
    Eigen::MatrixXd nodes;  // n x dim
    Eigen::VectorXd weights;
    std::string index_set = "custom";
    Family family = Family::legendre;
    DomainKind domain = DomainKind::box;
    std::vector<std::pair<double, double>> bounds;
    double tolerance = 0.0;
    double achieved_residual = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return static_cast<std::size_t>(weights.size()); }

    friend bool operator==(const QuadratureRule& a, const QuadratureRule& b)
    {
        return a.dim == b.dim && a.nodes == b.nodes && a.weights == b.weights && a.index_set == b.index_set &&
               a.family == b.family && a.domain == b.domain && a.bounds == b.bounds && a.tolerance == b.tolerance &&
               a.achieved_residual == b.achieved_residual && a.seed == b.seed;
    }
};

/// Nodes mapped from user coordinates onto the reference box [-1,1]^d of
/// the basis (identity for unbounded domains and for bounds of [-1,1]).
inline Eigen::MatrixXd reference_nodes(const QuadratureRule& r)
{
    Eigen::MatrixXd X = r.nodes;
    if (r.domain != DomainKind::box || r.bounds.empty())
        return X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const auto [lo, hi] = r.bounds[static_cast<std::size_t>(j)];
        if (lo == -1.0 && hi == 1.0)
            continue;
        X.col(j) = ((2.0 * X.col(j).array() - (lo + hi)) / (hi - lo)).matrix();
    }
    return X;
}

/// Inverse of reference_nodes.
inline Eigen::MatrixXd user_nodes(const Eigen::MatrixXd& reference, const std::vector<std::pair<double, double>>& bounds)
{
    Eigen::MatrixXd X = reference;
    for (Eigen::Index j = 0; j < X.cols() && static_cast<std::size_t>(j) < bounds.size(); ++j) {
        const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
        if (lo == -1.0 && hi == 1.0)
            continue;
        X.col(j) = (0.5 * (lo + hi) + 0.5 * (hi - lo) * X.col(j).array()).matrix();
    }
    return X;
}

struct DesignConfig
{
    double kappa_start = 0.9;
    double kappa_min = 0.5;
    double enrichment_fraction = 0.05;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    SolverConfig solver;
    int max_outer = 20;
    /// Node penalties start this far inside the box so returned nodes are
    /// feasible even with the last bit of penalty slack.
    double node_margin = 1e-6;
    /// Skip the sparse-grid estimate and start from this many nodes.
    std::optional<std::size_t> initial_size;
    /// Start from these nodes (reference coordinates, one per row) instead of
    /// a random sample; weights start equal.
    std::optional<Eigen::MatrixXd> initial_nodes;
    /// Solve once at the starting size; no elimination or enrichment.
    bool fixed_size = false;
    /// Upper limit on n while enriching; 0 picks max(2 * estimate, |Lambda|).
    std::size_t max_size = 0;
    /// Cooperative cancellation, checked between Gauss-Newton iterations.
    std::stop_token stop;

    void validate() const
    {
        if (!(kappa_min > 0.0 && kappa_min <= kappa_start && kappa_start <= 1.0))
            throw std::invalid_argument("DesignConfig: need 0 < kappa_min <= kappa_start <= 1");
        if (!(enrichment_fraction > 0.0))
            throw std::invalid_argument("DesignConfig: enrichment_fraction must be positive");
        if (!(tol > 0.0))
            throw std::invalid_argument("DesignConfig: tol must be positive");
        if (max_outer < 1)
            throw std::invalid_argument("DesignConfig: max_outer must be >= 1");
        solver.validate();
    }
};

/// One Gauss-Newton run inside the design loop.
struct PassRecord
{
    std::size_t n = 0;
    SolveOutcome outcome = SolveOutcome::iter_cap;
    std::size_t iterations = 0;
    double final_res = 0.0;
};

struct DesignResult
{
    QuadratureRule rule;
    SolveTrace trace;  // the solve that produced the rule
    std::vector<PassRecord> history;
};

class DesignFailure : public std::runtime_error
{
public:
    DesignFailure(const std::string& what, SolveTrace best, std::vector<PassRecord> history)
        : std::runtime_error(what), best_(std::move(best)), history_(std::move(history))
    {
    }
    const SolveTrace& best_trace() const { return best_; }
    const std::vector<PassRecord>& history() const { return history_; }

private:
    SolveTrace best_;
    std::vector<PassRecord> history_;
};

class DesignCancelled : public std::runtime_error
{
public:
    DesignCancelled() : std::runtime_error("design cancelled") {}
};

/// Closed-form estimate ceil((2d)^{k-1} / (k-1)!) of the non-nested
/// Gauss sparse-grid size.
inline std::size_t sparse_grid_size_formula(std::size_t d, int k)
{
    if (k < 1)
        throw std::invalid_argument("sparse_grid_size_formula: k must be >= 1");
    double v = 1.0;
    for (int i = 1; i < k; ++i)
        v *= 2.0 * static_cast<double>(d) / static_cast<double>(i);
    return static_cast<std::size_t>(std::ceil(v - 1e-9));
}

/// Non-nested Gauss sparse-grid size: exact by enumeration when the grid is
/// small enough to build, the closed-form estimate otherwise.
inline std::size_t estimate_sparse_grid_size(std::size_t d, int k, Family family = Family::legendre)
{
    if (k < 1)
        throw std::invalid_argument("estimate_sparse_grid_size: k must be >= 1");
    const std::size_t formula = sparse_grid_size_formula(d, k);
    if (formula > 20000 || d > 64)
        return formula;
    if (family == Family::custom)
        family = Family::legendre;
    return smolyak(family, d, k, Growth::gauss_linear).size();
}

/// Smallest total degree r with Lambda inside the total-degree set of order
/// r, and the matching Smolyak level ceil((r+1)/2).
inline int sparse_grid_level(const MultiIndexSet& s)
{
    const int r = s.max_order();
    return std::max(1, (r + 2) / 2);
}

namespace detail {

class Uniform01
{
public:
    explicit Uniform01(std::uint64_t seed, std::uint64_t stream)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        eng_.seed(seq);
    }

    /// Uniform on the open interval (0, 1).
    double operator()()
    {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

inline double normal_quantile(double u)
{
    return std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
}

/// Latin hypercube sample of n points in (0,1)^d, one per row.
inline Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t d, Uniform01& rng)
{
    Eigen::MatrixXd U(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.bits() % i)]);
        for (std::size_t i = 0; i < n; ++i)
            U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (static_cast<double>(perm[i]) + rng()) / static_cast<double>(n);
    }
    return U;
}

/// Maps unit-cube samples into the domain; draws replacements for samples
/// that land in a forbidden region.
inline Eigen::MatrixXd place_nodes(const DomainSpec& dom, Eigen::MatrixXd U, Uniform01& rng)
{
    const auto d = static_cast<Eigen::Index>(dom.dim());
    Eigen::MatrixXd X(U.rows(), d);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        for (int tries = 0;; ++tries) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const double u = U(i, j);
                if (dom.kind == DomainKind::gaussian_unbounded) {
                    x[static_cast<std::size_t>(j)] = normal_quantile(u);
                } else {
                    const double lo = dom.bounds[static_cast<std::size_t>(j)].first + dom.node_margin;
                    const double hi = dom.bounds[static_cast<std::size_t>(j)].second - dom.node_margin;
                    x[static_cast<std::size_t>(j)] = lo + (hi - lo) * u;
                }
            }
            if (dom.feasible(x))
                break;
            if (tries > 10000)
                throw std::runtime_error("initialize: could not sample a feasible node");
            for (Eigen::Index j = 0; j < d; ++j)
                U(i, j) = rng();
        }
        for (Eigen::Index j = 0; j < d; ++j)
            X(i, j) = x[static_cast<std::size_t>(j)];
    }
    return X;
}

inline Eigen::VectorXd initial_weights(const DomainSpec& dom, const Eigen::MatrixXd& X, double total)
{
    const auto n = X.rows();
    Eigen::VectorXd w(n);
    if (dom.kind == DomainKind::gaussian_unbounded) {
        for (Eigen::Index i = 0; i < n; ++i)
            w(i) = std::exp(-0.5 * X.row(i).squaredNorm());
        w *= total / w.sum();
    } else {
        w.setConstant(total / static_cast<double>(n));
    }
    return w;
}

inline void rescale_weights(DecisionVector& dv, double total)
{
    const double s = dv.weights().sum();
    if (s > 0.0)
        dv.weights() *= total / s;
}

} // namespace detail

/// Random start: Latin-hypercube nodes (normal quantiles of them for the
/// Gaussian domain) and weights summing to weight_total (|Lambda| in the
/// design loop).
inline DecisionVector initialize(std::size_t n, const DomainSpec& domain, double weight_total, std::uint64_t seed,
                                 std::uint64_t stream = 0)
{
    if (n < 1)
        throw std::invalid_argument("initialize: n must be >= 1");
    domain.validate();
    detail::Uniform01 rng(seed, stream);
    const Eigen::MatrixXd X = detail::place_nodes(domain, detail::latin_hypercube(n, domain.dim(), rng), rng);
    return DecisionVector(X, detail::initial_weights(domain, X, weight_total));
}

inline DecisionVector initialize(std::size_t n, const DomainSpec& domain, const MultiIndexSet& index_set,
                                 std::uint64_t seed)
{
    return initialize(n, domain, static_cast<double>(index_set.size()), seed);
}

/// Drops the count nodes of smallest weight (ties: the larger index goes
/// first) and rescales the rest to sum weight_total.
inline DecisionVector eliminate(const DecisionVector& dv, std::size_t count, double weight_total)
{
    if (count >= dv.n())
        throw std::invalid_argument("eliminate: count must be smaller than the node count");
    if (count == 0)
        return dv;
    std::vector<std::size_t> order(dv.n());
    std::iota(order.begin(), order.end(), 0);
    const auto w = dv.weights();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (w(static_cast<Eigen::Index>(a)) != w(static_cast<Eigen::Index>(b)))
            return w(static_cast<Eigen::Index>(a)) < w(static_cast<Eigen::Index>(b));
        return a > b;
    });
    std::vector<std::size_t> keep(order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
    std::sort(keep.begin(), keep.end());
    DecisionVector out(keep.size(), dv.dim());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        for (std::size_t j = 0; j < dv.dim(); ++j)
            out.coord(i, j) = dv.coord(keep[i], j);
        out.weights()(static_cast<Eigen::Index>(i)) = w(static_cast<Eigen::Index>(keep[i]));
    }
    detail::rescale_weights(out, weight_total);
    return out;
}

/// Appends count freshly sampled nodes (existing nodes unchanged); new
/// weights start at the current mean weight, then all weights are rescaled
/// to sum weight_total.
inline DecisionVector enrich(const DecisionVector& dv, std::size_t count, const DomainSpec& domain,
                             double weight_total, std::uint64_t seed, std::uint64_t stream = 1)
{
    if (count < 1)
        throw std::invalid_argument("enrich: count must be >= 1");
    detail::Uniform01 rng(seed, stream);
    const Eigen::MatrixXd Xnew = detail::place_nodes(domain, detail::latin_hypercube(count, domain.dim(), rng), rng);
    const std::size_t n = dv.n();
    DecisionVector out(n + count, dv.dim());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dv.dim(); ++j)
            out.coord(i, j) = dv.coord(i, j);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < dv.dim(); ++j)
            out.coord(n + i, j) = Xnew(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double mean = n > 0 ? dv.weights().sum() / static_cast<double>(n) : weight_total / static_cast<double>(count);
    out.weights().head(static_cast<Eigen::Index>(n)) = dv.weights();
    if (domain.kind == DomainKind::gaussian_unbounded) {
        for (std::size_t i = 0; i < count; ++i)
            out.weights()(static_cast<Eigen::Index>(n + i)) =
                mean * std::exp(-0.5 * Xnew.row(static_cast<Eigen::Index>(i)).squaredNorm());
    } else {
        out.weights().tail(static_cast<Eigen::Index>(count)).setConstant(mean);
    }
    detail::rescale_weights(out, weight_total);
    return out;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t attempt)
{
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (attempt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::size_t lower_bound_size(const MultiIndexSet& s)
{
    const int r = s.max_order();
    if (static_cast<long long>(s.size()) == binomial(static_cast<long long>(s.dim()) + r, r))
        return static_cast<std::size_t>(half_set_lower_bound_total(s.dim(), r));
    if (s.size() <= 200) {
        try {
            return half_set_size(s);
        } catch (const std::length_error&) {
        }
    }
    return 1;
}

} // namespace detail

/// Initial node count for the design loop.
inline std::size_t initial_design_size(const MultiIndexSet& s, const DomainSpec& domain, const DesignConfig& cfg)
{
    if (cfg.initial_nodes)
        return static_cast<std::size_t>(cfg.initial_nodes->rows());
    if (cfg.initial_size)
        return *cfg.initial_size;
    if (cfg.solver.high_dim_mode) {
        const double v = 2.0 * static_cast<double>(s.size()) / static_cast<double>(s.dim() + 1);
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v)));
    }
    const std::size_t est = estimate_sparse_grid_size(s.dim(), sparse_grid_level(s), domain.weight_family);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.kappa_start * static_cast<double>(est) - 1e-9)));
}

/// Designed quadrature: solve, shrink by dropping the smallest weights while
/// the solve keeps converging, grow by enrichment after stagnation, and stop
/// once a pass ends at the size it started from.
///
/// Sizes shrink along the kappa schedule first, then by enrichment-sized
/// steps, then one node at a time after the first failed shrink. Sizes
/// below the half-set bound are never tried, and neither is a size that has
/// already failed once.
inline DesignResult design(const MultiIndexSet& index_set, const DomainSpec& domain_in, const BasisFamily& basis,
                           const DesignConfig& cfg)
{
    cfg.validate();
    if (!is_downward_closed(index_set))
        throw std::invalid_argument("design: index set must be downward closed");
    const double M = static_cast<double>(index_set.size());
    SolverConfig scfg = cfg.solver;
    scfg.tol = cfg.tol * M;
    scfg.stop = cfg.stop;

    // A converged point may sit up to sqrt(tol / c) inside a penalized zone,
    // where c >= max(A, 1/tol) once ||R|| < tol; a cushion that wide keeps
    // such nodes truly feasible.
    DomainSpec domain = domain_in;
    const double intrusion = std::sqrt(scfg.tol / std::max(scfg.penalty_A, 1.0 / scfg.tol));
    domain.node_margin = std::max({domain.node_margin, cfg.node_margin, intrusion});
    MomentSystem sys(basis, index_set, domain);
    sys.set_target_scale(M);  // the alpha = 0 target is |Lambda| inside the loop

    const std::size_t est = initial_design_size(index_set, domain, cfg);
    const std::size_t sg = cfg.solver.high_dim_mode || cfg.initial_size || cfg.initial_nodes
                               ? est
                               : estimate_sparse_grid_size(index_set.dim(), sparse_grid_level(index_set), domain.weight_family);
    const std::size_t n_floor = detail::lower_bound_size(index_set);
    const std::size_t n_cap = cfg.max_size ? cfg.max_size : std::max<std::size_t>(2 * std::max(est, sg), index_set.size());

    std::uint64_t attempt = 0;
    DesignResult best;
    bool have_best = false;
    SolveTrace best_failed;
    std::vector<PassRecord> history;
    std::set<std::size_t> failed_sizes;

    auto run = [&](DecisionVector start) {
        if (cfg.stop.stop_requested())
            throw DesignCancelled();
        auto res = solve(sys, std::move(start), scfg);
        if (res.trace.outcome == SolveOutcome::cancelled)
            throw DesignCancelled();
        if (res.trace.outcome == SolveOutcome::converged) {
            // Penalties leave intrusions of order sqrt(tol / c); remove them
            // and keep the result only if the moments still match.
            Eigen::MatrixXd X = res.point.nodes();
            if (project_feasible(domain, X) > 0) {
                res.point = DecisionVector(X, res.point.weights());
                if (!(sys.residual(res.point).norm() < scfg.tol))
                    res.trace.outcome = SolveOutcome::stagnated;
            }
        }
        history.push_back({res.point.n(), res.trace.outcome, res.trace.iterations(), res.trace.final_res() / M});
        if (res.trace.outcome != SolveOutcome::converged &&
            (best_failed.records.empty() || res.trace.final_res_aug() < best_failed.final_res_aug()))
            best_failed = res.trace;
        return res;
    };

    auto accept = [&](const SolveResult& res) {
        if (have_best && best.rule.size() <= res.point.n())
            return;
        QuadratureRule q;
        q.dim = index_set.dim();
        q.nodes = res.point.nodes();
        q.weights = res.point.weights() / (M * basis.pi0());
        q.family = domain.weight_family;
        q.domain = domain.kind;
        q.bounds = domain.kind == DomainKind::box ? domain.bounds : std::vector<std::pair<double, double>>{};
        q.tolerance = cfg.tol;
        q.seed = cfg.seed;
        const MomentSystem truth(basis, index_set, domain_in);
        q.achieved_residual = truth.residual(DecisionVector(q.nodes, q.weights)).norm();
        best.rule = std::move(q);
        best.trace = res.trace;
        have_best = true;
    };

    // Converge at the current size, enriching after stagnation.
    auto converge = [&](DecisionVector dv) -> std::optional<SolveResult> {
        for (;;) {
            auto res = run(std::move(dv));
            if (res.trace.outcome == SolveOutcome::converged)
                return res;
            failed_sizes.insert(res.point.n());
            const std::size_t n = res.point.n();
            const auto add = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.enrichment_fraction * static_cast<double>(n))));
            if (n + add > n_cap)
                return std::nullopt;
            ++attempt;
            dv = enrich(res.point, add, domain, M, detail::mix_seed(cfg.seed, attempt));
        }
    };

    if (cfg.initial_nodes) {
        const Eigen::MatrixXd& X0 = *cfg.initial_nodes;
        if (static_cast<std::size_t>(X0.cols()) != index_set.dim() || X0.rows() < 1)
            throw std::invalid_argument("design: initial nodes have the wrong shape");
    }
    auto start_point = [&](std::size_t n) {
        if (cfg.initial_nodes)
            return DecisionVector(*cfg.initial_nodes, detail::initial_weights(domain, *cfg.initial_nodes, M));
        return initialize(n, domain, M, detail::mix_seed(cfg.seed, attempt));
    };

    if (cfg.fixed_size) {
        auto res = run(start_point(est));
        if (res.trace.outcome != SolveOutcome::converged)
            throw DesignFailure("design: no convergence at n = " + std::to_string(est), best_failed, history);
        accept(res);
        best.history = std::move(history);
        return best;
    }

    std::size_t n = cfg.initial_nodes ? est : std::max(est, n_floor);
    auto first = converge(start_point(n));
    if (!first)
        throw DesignFailure("design: no convergence for any size up to " + std::to_string(n_cap), best_failed, history);
    accept(*first);
    SolveResult current = std::move(*first);

    double kappa = cfg.kappa_start;
    bool kappa_phase = !cfg.solver.high_dim_mode && !cfg.initial_size && !cfg.initial_nodes;
    bool single_steps = false;
    std::size_t n0 = 0;

    for (int pass = 0; pass < cfg.max_outer; ++pass) {
        n = current.point.n();
        if (n == n0)
            break;
        n0 = n;

        std::size_t target = n;
        if (kappa_phase && kappa - 0.1 >= cfg.kappa_min - 1e-12) {
            kappa -= 0.1;
            target = static_cast<std::size_t>(std::ceil(kappa * static_cast<double>(sg) - 1e-9));
        }
        if (target >= n) {
            kappa_phase = false;
            const auto step = single_steps ? std::size_t{1}
                                           : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                                          cfg.enrichment_fraction * static_cast<double>(n))));
            target = n > step ? n - step : 1;
        }
        target = std::max(target, n_floor);
        while (target < n && failed_sizes.count(target))
            ++target;
        if (target >= n)
            break;

        auto next = run(eliminate(current.point, n - target, M));
        if (next.trace.outcome == SolveOutcome::converged) {
            accept(next);
            current = std::move(next);
            continue;
        }
        failed_sizes.insert(target);
        kappa_phase = false;
        if (!single_steps && n - target > 1) {
            // Retry the sizes that were skipped, one node at a time.
            single_steps = true;
            n0 = 0;
            continue;
        }
        single_steps = true;
        ++attempt;
        const auto add = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.enrichment_fraction * static_cast<double>(target))));
        auto grown = converge(enrich(next.point, add, domain, M, detail::mix_seed(cfg.seed, attempt)));
        if (!grown)
            break;
        accept(*grown);
        current = std::move(*grown);
    }

    best.history = std::move(history);
    return best;
}

/// Runs design once per seed on parallel workers; the lowest-listed seed that
/// converges wins, and later seeds are cancelled once it has.
inline DesignResult design_multi_seed(const MultiIndexSet& index_set, const DomainSpec& domain, const BasisFamily& basis,
                                      const DesignConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                      unsigned workers = std::max(1u, std::thread::hardware_concurrency()))
{
    if (seeds.empty())
        throw std::invalid_argument("design_multi_seed: need at least one seed");
    struct Slot
    {
        std::optional<DesignResult> result;
        std::exception_ptr error;
        bool done = false;
    };
    std::vector<Slot> slots(seeds.size());
    std::vector<std::stop_source> stops(seeds.size());
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next_seed = 0;

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lk(mu);
                if (next_seed >= seeds.size())
                    return;
                i = next_seed++;
            }
            DesignConfig c = cfg;
            c.seed = seeds[i];
            c.stop = stops[i].get_token();
            Slot s;
            try {
                s.result = design(index_set, domain, basis, c);
            } catch (...) {
                s.error = std::current_exception();
            }
            s.done = true;
            std::lock_guard lk(mu);
            slots[i] = std::move(s);
            if (slots[i].result)
                for (std::size_t j = i + 1; j < seeds.size(); ++j)
                    stops[j].request_stop();
            cv.notify_all();
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::min<std::size_t>(workers, seeds.size()); ++w)
            pool.emplace_back(worker);
    }
    for (auto& s : slots)
        if (s.result)
            return std::move(*s.result);
    for (auto& s : slots)
        if (s.error)
            std::rethrow_exception(s.error);
    throw std::runtime_error("design_multi_seed: no run finished");
}

// ---- rule files ----

inline nlohmann::json rule_to_json(const QuadratureRule& r)
{
    nlohmann::json j;
    j["dim"] = r.dim;
    j["family"] = family_name(r.family);
    j["domain"] = r.domain == DomainKind::box ? "box" : "gaussian";
    nlohmann::json b = nlohmann::json::array();
    for (const auto& [lo, hi] : r.bounds)
        b.push_back({lo, hi});
    j["bounds"] = b;
    j["index_set"] = r.index_set;
    j["tolerance"] = r.tolerance;
    j["achieved_residual"] = r.achieved_residual;
    j["seed"] = r.seed;
    nlohmann::json nodes = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.nodes.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < r.nodes.cols(); ++k)
            row.push_back(r.nodes(i, k));
        nodes.push_back(row);
    }
    j["nodes"] = nodes;
    j["weights"] = std::vector<double>(r.weights.data(), r.weights.data() + r.weights.size());
    return j;
}

inline QuadratureRule rule_from_json(const nlohmann::json& j)
{
    QuadratureRule r;
    try {
        const auto nodes = j.at("nodes").get<std::vector<std::vector<double>>>();
        const auto weights = j.at("weights").get<std::vector<double>>();
        r.dim = j.contains("dim") ? j.at("dim").get<std::size_t>() : (nodes.empty() ? 0 : nodes.front().size());
        if (nodes.size() != weights.size())
            throw std::runtime_error("rule file: node/weight count mismatch");
        r.nodes.resize(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(r.dim));
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].size() != r.dim)
                throw std::runtime_error("rule file: node " + std::to_string(i) + " has wrong dimension");
            for (std::size_t k = 0; k < r.dim; ++k)
                r.nodes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = nodes[i][k];
        }
        r.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        r.family = parse_family(j.value("family", std::string("legendre")));
        r.domain = j.value("domain", std::string("box")) == "gaussian" ? DomainKind::gaussian_unbounded : DomainKind::box;
        if (j.contains("bounds"))
            for (const auto& b : j.at("bounds"))
                r.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
        if (r.domain == DomainKind::box && r.bounds.empty())
            r.bounds.assign(r.dim, {-1.0, 1.0});
        if (r.bounds.size() != (r.domain == DomainKind::box ? r.dim : 0))
            throw std::runtime_error("rule file: bounds do not match the dimension");
        r.index_set = j.value("index_set", std::string("custom"));
        r.tolerance = j.value("tolerance", 0.0);
        r.achieved_residual = j.value("achieved_residual", 0.0);
        r.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("rule file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("rule file: ") + e.what());
    }
    return r;
}

namespace detail {

inline std::string shortest(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// d + 1 columns per row, weight last; shortest round-trip formatting.
inline void write_rule_csv(std::ostream& out, const QuadratureRule& r)
{
    for (Eigen::Index i = 0; i < r.nodes.rows(); ++i) {
        for (Eigen::Index k = 0; k < r.nodes.cols(); ++k)
            out << detail::shortest(r.nodes(i, k)) << ',';
        out << detail::shortest(r.weights(i)) << '\n';
    }
}

/// Reads the CSV layout; metadata defaults to a [-1,1] box with Legendre weight.
inline QuadratureRule read_rule_csv(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t'))
                ++p;
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc())
                throw std::runtime_error("rule csv: bad number on line " + std::to_string(lineno));
            row.push_back(v);
            p = res.ptr;
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r'))
                ++p;
            if (p < end) {
                if (*p != ',')
                    throw std::runtime_error("rule csv: expected ',' on line " + std::to_string(lineno));
                ++p;
            }
        }
        if (row.size() < 2)
            throw std::runtime_error("rule csv: need at least one coordinate and a weight on line " + std::to_string(lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("rule csv: ragged row " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw std::runtime_error("rule csv: no nodes");
    QuadratureRule r;
    r.dim = rows.front().size() - 1;
    r.nodes.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(r.dim));
    r.weights.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < r.dim; ++k)
            r.nodes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        r.weights(static_cast<Eigen::Index>(i)) = rows[i][r.dim];
    }
    r.bounds.assign(r.dim, {-1.0, 1.0});
    return r;
}

inline void write_rule_file(const std::string& path, const QuadratureRule& r)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write rule file: " + path);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        write_rule_csv(out, r);
    else
        out << rule_to_json(r).dump(2) << '\n';
}

inline QuadratureRule read_rule_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open rule file: " + path);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        return read_rule_csv(in);
    try {
        return rule_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("rule file " + path + ": " + e.what());
    }
}

} // namespace dquad

#endif // DQUAD_DESIGNER_HPP
