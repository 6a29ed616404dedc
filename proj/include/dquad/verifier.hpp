#ifndef DQUAD_VERIFIER_HPP
#define DQUAD_VERIFIER_HPP

#include "dquad/designer.hpp"
#include "dquad/sparse_grid.hpp"

#include <Eigen/Dense>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dquad {

struct MomentError
{
    MultiIndex index;
    double error;  // sum_q w_q pi_alpha(x_q) - delta_{alpha 0} / pi_0
};

struct ExactnessReport
{
    std::vector<MomentError> errors;
    double max_error = 0.0;
    double epsilon = 0.0;  // 2-norm of the moment errors
    double min_weight = 0.0;
    double max_weight = 0.0;
    std::size_t negative_weights = 0;
    std::size_t first_negative = 0;  // node index, meaningful when negative_weights > 0
};

namespace detail {

/// Monomial coefficients of the orthonormal p_0..p_m, built by multiplying
/// coefficient arrays through the recurrence.
inline std::vector<std::vector<double>> monomial_coefficients(const RecurrenceTable& rec, int m)
{
    std::vector<std::vector<double>> c(static_cast<std::size_t>(m) + 1);
    c[0] = {1.0 / std::sqrt(rec.b[0])};
    std::vector<double> prev;
    for (int k = 0; k < m; ++k) {
        const auto& cur = c[static_cast<std::size_t>(k)];
        std::vector<double> next(cur.size() + 1, 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            next[i + 1] += cur[i];
            next[i] -= rec.a[static_cast<std::size_t>(k)] * cur[i];
        }
        const double sb = std::sqrt(rec.b[static_cast<std::size_t>(k)]);
        for (std::size_t i = 0; i < prev.size(); ++i)
            next[i] -= sb * prev[i];
        const double sb1 = std::sqrt(rec.b[static_cast<std::size_t>(k) + 1]);
        for (double& v : next)
            v /= sb1;
        prev = cur;
        c[static_cast<std::size_t>(k) + 1] = std::move(next);
    }
    return c;
}

inline double horner(const std::vector<double>& c, double x)
{
    double v = 0.0;
    for (std::size_t i = c.size(); i-- > 0;)
        v = v * x + c[i];
    return v;
}

/// Basis values through the monomial expansion (degree <= 10 per axis) or
/// the recurrence beyond that.
class IndependentBasis
{
public:
    static constexpr int monomial_limit = 10;

    IndependentBasis(const BasisFamily& basis, int max_degree) : basis_(basis), max_degree_(max_degree)
    {
        for (std::size_t j = 0; j < basis.dim(); ++j)
            coeffs_.push_back(max_degree <= monomial_limit ? monomial_coefficients(basis.table(j), max_degree)
                                                           : std::vector<std::vector<double>>{});
    }

    double value(const MultiIndex& a, std::span<const double> x) const
    {
        double v = 1.0;
        for (std::size_t j = 0; j < a.dim(); ++j)
            v *= max_degree_ <= monomial_limit ? horner(coeffs_[j][static_cast<std::size_t>(a[j])], x[j])
                                               : eval_univariate(basis_.table(j), a[j], x[j]);
        return v;
    }

private:
    BasisFamily basis_;
    int max_degree_;
    std::vector<std::vector<std::vector<double>>> coeffs_;
};

inline void check_rule_dim(const PointRule& rule, const BasisFamily& basis, const MultiIndexSet& s)
{
    if (rule.dim() != basis.dim() || s.dim() != basis.dim())
        throw std::invalid_argument("verifier: rule/basis/index set dimension mismatch");
}

} // namespace detail

/// Rule as a PointRule in the reference coordinates of its basis.
inline PointRule reference_rule(const QuadratureRule& r)
{
    return PointRule{reference_nodes(r), r.weights};
}

/// Moment errors over the index set, computed without the moment-system code.
inline ExactnessReport exactness(const PointRule& rule, const MultiIndexSet& s, const BasisFamily& basis)
{
    detail::check_rule_dim(rule, basis, s);
    ExactnessReport rep;
    const detail::IndependentBasis ib(basis, s.max_component());
    std::vector<double> x(rule.dim());
    double sq = 0.0;
    for (const auto& a : s) {
        double sum = 0.0;
        for (Eigen::Index q = 0; q < rule.nodes.rows(); ++q) {
            for (std::size_t j = 0; j < x.size(); ++j)
                x[j] = rule.nodes(q, static_cast<Eigen::Index>(j));
            sum += rule.weights(q) * ib.value(a, x);
        }
        const double err = sum - (a.is_zero() ? 1.0 / basis.pi0() : 0.0);
        rep.errors.push_back({a, err});
        rep.max_error = std::max(rep.max_error, std::abs(err));
        sq += err * err;
    }
    rep.epsilon = std::sqrt(sq);
    if (rule.weights.size() > 0) {
        rep.min_weight = rule.weights.minCoeff();
        rep.max_weight = rule.weights.maxCoeff();
    }
    for (Eigen::Index q = 0; q < rule.weights.size(); ++q)
        if (rule.weights(q) < 0.0 && rep.negative_weights++ == 0)
            rep.first_negative = static_cast<std::size_t>(q);
    return rep;
}

inline ExactnessReport exactness(const QuadratureRule& rule, const MultiIndexSet& s, const BasisFamily& basis)
{
    return exactness(reference_rule(rule), s, basis);
}

inline nlohmann::json report_to_json(const ExactnessReport& rep)
{
    nlohmann::json j;
    j["epsilon"] = rep.epsilon;
    j["max_error"] = rep.max_error;
    j["min_weight"] = rep.min_weight;
    j["max_weight"] = rep.max_weight;
    j["negative_weights"] = rep.negative_weights;
    nlohmann::json errs = nlohmann::json::object();
    for (const auto& e : rep.errors)
        errs[e.index.to_string()] = e.error;
    j["errors"] = errs;
    return j;
}

struct StabilityGap
{
    double lhs = 0.0;       // |I(f) - Q(f)|
    double rhs = 0.0;       // epsilon ||f|| + max_q |f(x_q) - p(x_q)|
    double epsilon = 0.0;
    double f_norm = 0.0;    // L2 norm under the weight
    double max_node_deviation = 0.0;
};

/// Both sides of the stability bound for f against its oracle L2 projection
/// p onto span{pi_alpha : alpha in s}. f takes reference coordinates.
inline StabilityGap stability_gap(const PointRule& rule, const Integrand& f, const MultiIndexSet& s,
                                  const BasisFamily& basis, std::optional<int> projection_budget = std::nullopt)
{
    detail::check_rule_dim(rule, basis, s);
    const int budget = projection_budget.value_or(2 * s.max_component() + 6);
    const PointRule oracle = oracle_rule(basis, budget);
    const auto d = rule.dim();

    std::vector<double> fo(oracle.size());
    std::vector<double> x(d);
    for (Eigen::Index q = 0; q < oracle.nodes.rows(); ++q) {
        for (std::size_t j = 0; j < d; ++j)
            x[j] = oracle.nodes(q, static_cast<Eigen::Index>(j));
        fo[static_cast<std::size_t>(q)] = f(x);
    }
    double I = 0.0, f2 = 0.0;
    for (Eigen::Index q = 0; q < oracle.weights.size(); ++q) {
        I += oracle.weights(q) * fo[static_cast<std::size_t>(q)];
        f2 += oracle.weights(q) * fo[static_cast<std::size_t>(q)] * fo[static_cast<std::size_t>(q)];
    }
    std::vector<double> coef;
    for (const auto& a : s) {
        double c = 0.0;
        for (Eigen::Index q = 0; q < oracle.nodes.rows(); ++q) {
            for (std::size_t j = 0; j < d; ++j)
                x[j] = oracle.nodes(q, static_cast<Eigen::Index>(j));
            c += oracle.weights(q) * fo[static_cast<std::size_t>(q)] * eval_multivariate(basis, a, x);
        }
        coef.push_back(c);
    }

    StabilityGap g;
    g.epsilon = exactness(rule, s, basis).epsilon;
    g.f_norm = std::sqrt(std::max(0.0, f2));
    double Q = 0.0;
    for (Eigen::Index q = 0; q < rule.nodes.rows(); ++q) {
        for (std::size_t j = 0; j < d; ++j)
            x[j] = rule.nodes(q, static_cast<Eigen::Index>(j));
        const double fx = f(x);
        Q += rule.weights(q) * fx;
        double p = 0.0;
        std::size_t k = 0;
        for (const auto& a : s)
            p += coef[k++] * eval_multivariate(basis, a, x);
        g.max_node_deviation = std::max(g.max_node_deviation, std::abs(fx - p));
    }
    g.lhs = std::abs(I - Q);
    g.rhs = g.epsilon * g.f_norm + g.max_node_deviation;
    return g;
}

/// f_hat_alpha = sum_q pi_alpha(x_q) f(x_q) w_q for alpha in theta, in set order.
inline std::vector<double> discrete_projection(const Integrand& f, const PointRule& rule, const MultiIndexSet& theta,
                                               const BasisFamily& basis)
{
    detail::check_rule_dim(rule, basis, theta);
    std::vector<double> out(theta.size(), 0.0);
    std::vector<double> x(rule.dim());
    for (Eigen::Index q = 0; q < rule.nodes.rows(); ++q) {
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = rule.nodes(q, static_cast<Eigen::Index>(j));
        const double fw = f(x) * rule.weights(q);
        std::size_t k = 0;
        for (const auto& a : theta)
            out[k++] += eval_multivariate(basis, a, x) * fw;
    }
    return out;
}

class NotUnisolvent : public std::runtime_error
{
public:
    NotUnisolvent() : std::runtime_error("nodes not unisolvent") {}
};

/// Values of the Lebesgue function sum_j |l_j(x)| on a tensor grid of
/// `resolution` points per axis over [-1,1]^d (d <= 2). nodes is n x d in
/// reference coordinates with n = |s|.
class LebesgueFunction
{
public:
    LebesgueFunction(const Eigen::MatrixXd& nodes, const MultiIndexSet& s, const BasisFamily& basis)
        : set_(s), basis_(basis)
    {
        const auto n = nodes.rows();
        if (static_cast<std::size_t>(n) != s.size())
            throw std::invalid_argument("lebesgue: node count must equal the index set size");
        if (s.dim() >= 3)
            throw std::domain_error("lebesgue: only d <= 2 is supported");
        if (static_cast<std::size_t>(nodes.cols()) != s.dim() || basis.dim() != s.dim())
            throw std::invalid_argument("lebesgue: dimension mismatch");
        Eigen::MatrixXd V(n, n);
        std::vector<double> x(s.dim());
        for (Eigen::Index j = 0; j < n; ++j) {
            for (std::size_t a = 0; a < x.size(); ++a)
                x[a] = nodes(j, static_cast<Eigen::Index>(a));
            std::size_t k = 0;
            for (const auto& al : s)
                V(static_cast<Eigen::Index>(k++), j) = eval_multivariate(basis, al, x);
        }
        // The LU condition estimate misses exact zero pivots, so test the spectrum.
        const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(V).singularValues();
        if (!(sv(n - 1) >= 1e-13 * sv(0)))
            throw NotUnisolvent();
        lu_.compute(V);
    }

    double operator()(std::span<const double> x) const
    {
        Eigen::VectorXd p(static_cast<Eigen::Index>(set_.size()));
        std::size_t k = 0;
        for (const auto& al : set_)
            p(static_cast<Eigen::Index>(k++)) = eval_multivariate(basis_, al, x);
        return lu_.solve(p).cwiseAbs().sum();
    }

    /// resolution^d samples; row-major over the grid (last axis fastest).
    Eigen::MatrixXd grid(int resolution) const
    {
        if (resolution < 2)
            throw std::invalid_argument("lebesgue: grid resolution must be >= 2");
        const auto d = set_.dim();
        const auto rows = static_cast<Eigen::Index>(std::pow(resolution, static_cast<double>(d)));
        Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(d) + 1);
        std::vector<double> x(d);
        for (Eigen::Index q = 0; q < rows; ++q) {
            Eigen::Index rem = q;
            for (std::size_t a = d; a-- > 0;) {
                const auto i = rem % resolution;
                rem /= resolution;
                x[a] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(resolution - 1);
                out(q, static_cast<Eigen::Index>(a)) = x[a];
            }
            out(q, static_cast<Eigen::Index>(d)) = (*this)(x);
        }
        return out;
    }

private:
    MultiIndexSet set_;
    BasisFamily basis_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline double lebesgue_constant(const Eigen::MatrixXd& nodes, const MultiIndexSet& s, const BasisFamily& basis,
                                int grid_resolution = 200)
{
    const LebesgueFunction L(nodes, s, basis);
    return L.grid(grid_resolution).col(static_cast<Eigen::Index>(s.dim())).maxCoeff();
}

/// Padua points of degree r: (cos(j pi / r), cos(k pi / (r+1))) for
/// 0 <= j <= r, 0 <= k <= r+1 with j + k even; (r+1)(r+2)/2 points.
inline Eigen::MatrixXd padua_points(int r)
{
    if (r < 0)
        throw std::invalid_argument("padua_points: r must be >= 0");
    std::vector<std::pair<double, double>> pts;
    for (int j = 0; j <= r; ++j)
        for (int k = 0; k <= r + 1; ++k) {
            if ((j + k) % 2 != 0)
                continue;
            const double x = r == 0 ? 1.0 : std::cos(std::numbers::pi * j / r);
            const double y = std::cos(std::numbers::pi * k / (r + 1));
            pts.emplace_back(x, y);
        }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = pts[i].first;
        X(static_cast<Eigen::Index>(i), 1) = pts[i].second;
    }
    return X;
}

} // namespace dquad

#endif // DQUAD_VERIFIER_HPP
