#ifndef DQUAD_SPARSE_GRID_HPP
#define DQUAD_SPARSE_GRID_HPP

#include "dquad/index_sets.hpp"
#include "dquad/ortho_basis.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dquad {

struct UnivariateRule
{
    Family family = Family::custom;
    std::vector<double> nodes;    // ascending
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

/// Nodes (n x d, one per row) with weights; the common currency of the
/// sparse-grid, oracle and verification code.
struct PointRule
{
    Eigen::MatrixXd nodes;
    Eigen::VectorXd weights;

    std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
    std::size_t dim() const { return static_cast<std::size_t>(nodes.cols()); }

    std::size_t negative_weight_count() const
    {
        return static_cast<std::size_t>((weights.array() < 0.0).count());
    }
};

struct SparseGridRule : PointRule
{
    int level = 1;
};

namespace detail {

inline bool symmetric_table(const RecurrenceTable& rec, std::size_t n)
{
    for (std::size_t m = 0; m < n; ++m)
        if (rec.a[m] != 0.0)
            return false;
    return true;
}

inline double christoffel_weight(const RecurrenceTable& rec, int n, double x)
{
    std::vector<double> p(static_cast<std::size_t>(n));
    eval_univariate_all(rec, n - 1, x, p);
    double s = 0.0;
    for (double v : p)
        s += v * v;
    return 1.0 / s;
}

} // namespace detail

/// n-point Gauss rule for the weight behind rec: nodes are the eigenvalues
/// of the Jacobi matrix, polished by Newton on p_n; weights are the
/// reciprocal Christoffel sums 1/sum_{k<n} p_k(x)^2.
inline UnivariateRule gauss_rule(const RecurrenceTable& rec, int n)
{
    if (n < 1)
        throw std::invalid_argument("gauss_rule: n must be >= 1");
    rec.validate();
    if (rec.max_degree() < n)
        throw std::out_of_range("gauss_rule: recurrence table too short for n = " + std::to_string(n));
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (int m = 0; m < n; ++m) {
        T(m, m) = rec.a[static_cast<std::size_t>(m)];
        if (m + 1 < n)
            T(m, m + 1) = T(m + 1, m) = std::sqrt(rec.b[static_cast<std::size_t>(m) + 1]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("gauss_rule: Jacobi eigenproblem failed");

    UnivariateRule r;
    r.family = rec.family;
    r.nodes.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(r.nodes.begin(), r.nodes.end());
    std::vector<double> v(static_cast<std::size_t>(n) + 1), dv(static_cast<std::size_t>(n) + 1);
    for (double& x : r.nodes) {
        for (int it = 0; it < 3; ++it) {
            eval_univariate_with_derivative(rec, n, x, v, dv);
            const double dx = v[static_cast<std::size_t>(n)] / dv[static_cast<std::size_t>(n)];
            if (!std::isfinite(dx))
                break;
            x -= dx;
        }
    }
    if (detail::symmetric_table(rec, static_cast<std::size_t>(n))) {
        for (int i = 0; i < n / 2; ++i) {
            const double h = 0.5 * (r.nodes[static_cast<std::size_t>(n - 1 - i)] - r.nodes[static_cast<std::size_t>(i)]);
            r.nodes[static_cast<std::size_t>(i)] = -h;
            r.nodes[static_cast<std::size_t>(n - 1 - i)] = h;
        }
        if (n % 2 == 1)
            r.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    }
    r.weights.resize(r.nodes.size());
    for (std::size_t i = 0; i < r.nodes.size(); ++i)
        r.weights[i] = detail::christoffel_weight(rec, n, r.nodes[i]);
    return r;
}

inline UnivariateRule gauss_rule(Family family, int n)
{
    return gauss_rule(standard_recurrence(family, n), n);
}

/// Interpolatory rule on the n Chebyshev extrema cos(pi j/(n-1)) (nested
/// for n = 1, 3, 5, 9, ...), exact on p_0..p_{n-1} of the given weight.
inline UnivariateRule clenshaw_curtis_rule(const RecurrenceTable& rec, int n)
{
    if (n < 1)
        throw std::invalid_argument("clenshaw_curtis_rule: n must be >= 1");
    if (rec.max_degree() < n - 1)
        throw std::out_of_range("clenshaw_curtis_rule: recurrence table too short");
    UnivariateRule r;
    r.family = rec.family;
    if (n == 1) {
        r.nodes = {0.0};
        r.weights = {rec.b[0]};
        return r;
    }
    for (int j = n - 1; j >= 0; --j) {
        double x = std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n - 1));
        if (2 * j == n - 1)
            x = 0.0;
        r.nodes.push_back(x);
    }
    for (int j = 0; j < n / 2; ++j)
        r.nodes[static_cast<std::size_t>(n - 1 - j)] = -r.nodes[static_cast<std::size_t>(j)];
    Eigen::MatrixXd V(n, n);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        eval_univariate_all(rec, n - 1, r.nodes[static_cast<std::size_t>(j)], p);
        for (int m = 0; m < n; ++m)
            V(m, j) = p[static_cast<std::size_t>(m)];
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = std::sqrt(rec.b[0]);
    const Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    r.weights.assign(w.data(), w.data() + n);
    return r;
}

/// Full tensor grid with product weights; axis 0 varies slowest.
inline PointRule tensor_rule(const std::vector<UnivariateRule>& rules)
{
    if (rules.empty())
        throw std::invalid_argument("tensor_rule: need at least one dimension");
    std::size_t total = 1;
    for (const auto& r : rules) {
        if (r.size() == 0)
            throw std::invalid_argument("tensor_rule: empty univariate rule");
        total *= r.size();
    }
    const auto d = static_cast<Eigen::Index>(rules.size());
    PointRule out;
    out.nodes.resize(static_cast<Eigen::Index>(total), d);
    out.weights.resize(static_cast<Eigen::Index>(total));
    std::vector<std::size_t> idx(rules.size(), 0);
    for (std::size_t q = 0; q < total; ++q) {
        double w = 1.0;
        for (std::size_t j = 0; j < rules.size(); ++j) {
            out.nodes(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = rules[j].nodes[idx[j]];
            w *= rules[j].weights[idx[j]];
        }
        out.weights(static_cast<Eigen::Index>(q)) = w;
        for (std::size_t j = rules.size(); j-- > 0;) {
            if (++idx[j] < rules[j].size())
                break;
            idx[j] = 0;
        }
    }
    return out;
}

enum class Growth { gauss_linear, clenshaw_curtis_nested };

/// Points at univariate level i >= 1.
inline int growth_points(Growth g, int level)
{
    if (level < 1)
        throw std::invalid_argument("growth_points: level must be >= 1");
    if (g == Growth::gauss_linear)
        return level;
    return level == 1 ? 1 : (1 << (level - 1)) + 1;
}

/// Level-k Smolyak rule: sum over multi-levels i (i_j >= 1) with
/// k <= |i| <= k + d - 1 of (-1)^{k+d-1-|i|} C(d-1, k+d-1-|i|) times the
/// tensor rule of the level-i_j univariate rules, with coincident nodes merged.
inline SparseGridRule smolyak(const RecurrenceTable& rec, std::size_t d, int k, Growth growth = Growth::gauss_linear)
{
    if (d < 1)
        throw std::invalid_argument("smolyak: d must be >= 1");
    if (k < 1)
        throw std::invalid_argument("smolyak: k must be >= 1");

    std::vector<UnivariateRule> level_rules;
    for (int i = 1; i <= k; ++i) {
        const int n = growth_points(growth, i);
        const RecurrenceTable t = rec.max_degree() >= n ? rec : standard_recurrence(rec.family, n);
        level_rules.push_back(growth == Growth::gauss_linear ? gauss_rule(t, n) : clenshaw_curtis_rule(t, n));
    }

    const bool nested = growth == Growth::clenshaw_curtis_nested;
    std::map<std::vector<double>, double> merged;
    std::vector<std::vector<double>> order;
    auto key_of = [nested](std::vector<double> x) {
        if (nested)
            for (double& v : x)
                v = std::round(v * 1e12) / 1e12 + 0.0;
        return x;
    };

    const int dk = static_cast<int>(d);
    std::vector<int> lv(d, 1);
    // Enumerate all level vectors with entries >= 1 and |i| <= k + d - 1.
    const std::function<void(std::size_t, int)> rec_levels = [&](std::size_t axis, int used) {
        if (axis == d) {
            const int s = used;
            if (s < k)
                return;
            const int gap = k + dk - 1 - s;
            const double coef = ((gap % 2 == 0) ? 1.0 : -1.0) * static_cast<double>(binomial(dk - 1, gap));
            std::vector<UnivariateRule> parts;
            for (std::size_t j = 0; j < d; ++j)
                parts.push_back(level_rules[static_cast<std::size_t>(lv[j] - 1)]);
            const PointRule t = tensor_rule(parts);
            for (Eigen::Index q = 0; q < t.nodes.rows(); ++q) {
                std::vector<double> x(d);
                for (std::size_t j = 0; j < d; ++j)
                    x[j] = t.nodes(q, static_cast<Eigen::Index>(j));
                auto key = key_of(x);
                auto [it, inserted] = merged.emplace(key, 0.0);
                if (inserted)
                    order.push_back(x);
                it->second += coef * t.weights(q);
            }
            return;
        }
        const int remaining_axes = dk - static_cast<int>(axis) - 1;
        for (int i = 1; used + i + remaining_axes <= k + dk - 1 && i <= k; ++i) {
            lv[axis] = i;
            rec_levels(axis + 1, used + i);
        }
    };
    rec_levels(0, 0);

    SparseGridRule out;
    out.level = k;
    out.nodes.resize(static_cast<Eigen::Index>(order.size()), dk);
    out.weights.resize(static_cast<Eigen::Index>(order.size()));
    for (std::size_t q = 0; q < order.size(); ++q) {
        for (std::size_t j = 0; j < d; ++j)
            out.nodes(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = order[q][j];
        out.weights(static_cast<Eigen::Index>(q)) = merged.at(key_of(order[q]));
    }
    return out;
}

inline SparseGridRule smolyak(Family family, std::size_t d, int k, Growth growth = Growth::gauss_linear)
{
    const int n = growth_points(growth, k);
    return smolyak(standard_recurrence(family, n), d, k, growth);
}

/// Tensor Gauss rule with ceil((budget+1)/2) points per axis for the
/// weights of basis; exact for polynomials of per-axis degree <= budget.
inline PointRule oracle_rule(const BasisFamily& basis, int degree_budget)
{
    constexpr std::size_t max_dim = 8;
    if (basis.dim() > max_dim)
        throw std::domain_error("oracle: dimension " + std::to_string(basis.dim()) +
                                " too large for tensor quadrature; use analytic moments");
    if (degree_budget < 0)
        throw std::invalid_argument("oracle: degree budget must be >= 0");
    const int m = (degree_budget + 2) / 2;
    double total = 1.0;
    for (std::size_t j = 0; j < basis.dim(); ++j)
        total *= m;
    if (total > 5e7)
        throw std::domain_error("oracle: tensor grid of " + std::to_string(static_cast<long long>(total)) +
                                " points is too large");
    std::vector<UnivariateRule> rules;
    for (std::size_t j = 0; j < basis.dim(); ++j) {
        const auto& t = basis.table(j);
        if (t.max_degree() >= m)
            rules.push_back(gauss_rule(t, m));
        else if (t.family != Family::custom)
            rules.push_back(gauss_rule(standard_recurrence(t.family, m), m));
        else
            throw std::out_of_range("oracle: custom recurrence table too short for the degree budget");
    }
    return tensor_rule(rules);
}

using Integrand = std::function<double(std::span<const double>)>;

inline double integrate(const PointRule& rule, const Integrand& f)
{
    std::vector<double> x(rule.dim());
    double s = 0.0;
    for (Eigen::Index q = 0; q < rule.nodes.rows(); ++q) {
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = rule.nodes(q, static_cast<Eigen::Index>(j));
        s += rule.weights(q) * f(x);
    }
    return s;
}

inline double oracle_integrate(const Integrand& f, const BasisFamily& basis, int degree_budget)
{
    return integrate(oracle_rule(basis, degree_budget), f);
}

} // namespace dquad

#endif // DQUAD_SPARSE_GRID_HPP
