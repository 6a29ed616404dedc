#ifndef DQUAD_MOMENT_SYSTEM_HPP
#define DQUAD_MOMENT_SYSTEM_HPP

#include "dquad/domains.hpp"
#include "dquad/index_sets.hpp"
#include "dquad/ortho_basis.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dquad {

/// Flattened (X, w): n node blocks of d coordinates, then n weights.
class DecisionVector
{
public:
    DecisionVector() = default;

    DecisionVector(std::size_t n, std::size_t dim) : n_(n), dim_(dim), v_(Eigen::VectorXd::Zero(idx(n * (dim + 1)))) {}

    DecisionVector(const Eigen::MatrixXd& nodes, const Eigen::VectorXd& weights)
        : DecisionVector(static_cast<std::size_t>(nodes.rows()), static_cast<std::size_t>(nodes.cols()))
    {
        if (weights.size() != nodes.rows())
            throw std::invalid_argument("DecisionVector: node/weight count mismatch");
        set_nodes(nodes);
        this->weights() = weights;
    }

    std::size_t n() const { return n_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return n_ * (dim_ + 1); }

    Eigen::VectorXd& values() { return v_; }
    const Eigen::VectorXd& values() const { return v_; }

    double& coord(std::size_t i, std::size_t j) { return v_(idx(i * dim_ + j)); }
    double coord(std::size_t i, std::size_t j) const { return v_(idx(i * dim_ + j)); }

    Eigen::VectorBlock<Eigen::VectorXd> weights() { return v_.segment(idx(n_ * dim_), idx(n_)); }
    Eigen::VectorBlock<const Eigen::VectorXd> weights() const { return v_.segment(idx(n_ * dim_), idx(n_)); }

    /// n x d copy, one node per row.
    Eigen::MatrixXd nodes() const
    {
        Eigen::MatrixXd X(idx(n_), idx(dim_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                X(idx(i), idx(j)) = coord(i, j);
        return X;
    }

    void set_nodes(const Eigen::MatrixXd& X)
    {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                coord(i, j) = X(idx(i), idx(j));
    }

    bool all_finite() const { return v_.allFinite(); }

    friend bool operator==(const DecisionVector& a, const DecisionVector& b)
    {
        return a.n_ == b.n_ && a.dim_ == b.dim_ && a.v_ == b.v_;
    }

private:
    static Eigen::Index idx(std::size_t k) { return static_cast<Eigen::Index>(k); }

    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    Eigen::VectorXd v_;
};

/// Moment-matching system V(X) w = target over an index set, plus the
/// domain penalties that make up the augmented residual.
class MomentSystem
{
public:
    MomentSystem(BasisFamily basis, MultiIndexSet index_set, DomainSpec domain)
        : basis_(std::move(basis)), set_(std::move(index_set)), domain_(std::move(domain))
    {
        if (set_.empty() || !set_.contains_zero())
            throw std::invalid_argument("MomentSystem: index set must contain the zero index");
        if (basis_.dim() != set_.dim() || domain_.dim() != set_.dim())
            throw std::invalid_argument("MomentSystem: basis/index set/domain dimension mismatch");
        domain_.validate();
        target_scale_ = 1.0 / basis_.pi0();
        max_deg_.assign(set_.dim(), 0);
        for (const auto& a : set_)
            for (std::size_t j = 0; j < a.dim(); ++j)
                max_deg_[j] = std::max(max_deg_[j], a[j]);
        for (std::size_t j = 0; j < set_.dim(); ++j)
            if (max_deg_[j] > basis_.table(j).max_degree())
                throw std::invalid_argument("MomentSystem: index set exceeds recurrence table on axis " +
                                            std::to_string(j));
        sparse_ = basis_.unit_p0();
        supports_.reserve(set_.size());
        for (const auto& a : set_) {
            std::vector<std::pair<std::size_t, int>> s;
            for (std::size_t j = 0; j < a.dim(); ++j)
                if (!sparse_ || a[j] != 0)
                    s.emplace_back(j, a[j]);
            supports_.push_back(std::move(s));
        }
    }

    const BasisFamily& basis() const { return basis_; }
    const MultiIndexSet& index_set() const { return set_; }
    const DomainSpec& domain() const { return domain_; }
    std::size_t dim() const { return set_.dim(); }
    std::size_t size() const { return set_.size(); }

    /// Value of the alpha = 0 target (1/pi_0 unless rescaled).
    double target_scale() const { return target_scale_; }
    void set_target_scale(double s) { target_scale_ = s; }

    Eigen::VectorXd target() const
    {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
        t(0) = target_scale_;
        return t;
    }

    /// M x n, entry (k, j) = pi_{alpha(k)}(x_j). X is n x d.
    Eigen::MatrixXd vandermonde(const Eigen::MatrixXd& X) const
    {
        check_nodes(X);
        const auto n = X.rows();
        Eigen::MatrixXd V(static_cast<Eigen::Index>(size()), n);
        Tables t = tables(X, false);
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::size_t k = 0; k < size(); ++k)
                V(static_cast<Eigen::Index>(k), i) = basis_value(t, i, k);
        return V;
    }

    Eigen::VectorXd residual(const DecisionVector& dv) const
    {
        check(dv);
        return vandermonde(dv.nodes()) * dv.weights() - target();
    }

    /// Analytic M x (d+1)n Jacobian of the residual.
    Eigen::MatrixXd jacobian(const DecisionVector& dv) const
    {
        check(dv);
        const auto n = static_cast<Eigen::Index>(dv.n());
        const auto d = static_cast<Eigen::Index>(dim());
        const Eigen::MatrixXd X = dv.nodes();
        Tables t = tables(X, true);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), (d + 1) * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = dv.weights()(i);
            for (std::size_t k = 0; k < size(); ++k) {
                const auto row = static_cast<Eigen::Index>(k);
                J(row, n * d + i) = basis_value(t, i, k);
                for (const auto& [axis, deg] : supports_[k]) {
                    if (deg == 0)
                        continue;
                    J(row, i * d + static_cast<Eigen::Index>(axis)) = wi * basis_partial(t, i, k, axis);
                }
            }
        }
        return J;
    }

    /// Same Jacobian in compressed column storage; node columns only carry
    /// entries for axes in the support of each index.
    Eigen::SparseMatrix<double> jacobian_sparse(const DecisionVector& dv) const
    {
        check(dv);
        const auto n = static_cast<Eigen::Index>(dv.n());
        const auto d = static_cast<Eigen::Index>(dim());
        const Eigen::MatrixXd X = dv.nodes();
        Tables t = tables(X, true);
        std::vector<Eigen::Triplet<double>> trip;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = dv.weights()(i);
            for (std::size_t k = 0; k < size(); ++k) {
                const auto row = static_cast<Eigen::Index>(k);
                trip.emplace_back(row, n * d + i, basis_value(t, i, k));
                for (const auto& [axis, deg] : supports_[k]) {
                    if (deg == 0)
                        continue;
                    trip.emplace_back(row, i * d + static_cast<Eigen::Index>(axis), wi * basis_partial(t, i, k, axis));
                }
            }
        }
        Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(size()), (d + 1) * n);
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    /// All (d+1)n penalties: coordinates node-major, then weights.
    Eigen::VectorXd penalties(const DecisionVector& dv) const
    {
        check(dv);
        Eigen::VectorXd p(static_cast<Eigen::Index>(dv.size()));
        const auto nd = static_cast<Eigen::Index>(dv.n() * dim());
        p.head(nd) = node_penalties(domain_, dv.nodes());
        p.tail(static_cast<Eigen::Index>(dv.n())) = weight_penalties(domain_, dv.weights());
        return p;
    }

    Eigen::SparseMatrix<double> penalty_jacobian(const DecisionVector& dv) const
    {
        check(dv);
        return dquad::penalty_jacobian(domain_, dv.nodes(), dv.weights());
    }

private:
    struct Tables
    {
        // values[i][j][m] = p^{(j)}_m(x_ij), derivs likewise.
        std::vector<std::vector<std::vector<double>>> values;
        std::vector<std::vector<std::vector<double>>> derivs;
    };

    void check(const DecisionVector& dv) const
    {
        if (dv.dim() != dim())
            throw std::invalid_argument("MomentSystem: decision vector dimension mismatch");
    }

    void check_nodes(const Eigen::MatrixXd& X) const
    {
        if (static_cast<std::size_t>(X.cols()) != dim())
            throw std::invalid_argument("MomentSystem: node dimension mismatch");
    }

    Tables tables(const Eigen::MatrixXd& X, bool with_derivs) const
    {
        const auto n = static_cast<std::size_t>(X.rows());
        Tables t;
        t.values.resize(n);
        if (with_derivs)
            t.derivs.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.values[i].resize(dim());
            if (with_derivs)
                t.derivs[i].resize(dim());
            for (std::size_t j = 0; j < dim(); ++j) {
                const auto len = static_cast<std::size_t>(max_deg_[j]) + 1;
                const double x = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                t.values[i][j].resize(len);
                if (with_derivs) {
                    t.derivs[i][j].resize(len);
                    eval_univariate_with_derivative(basis_.table(j), max_deg_[j], x, t.values[i][j], t.derivs[i][j]);
                } else {
                    eval_univariate_all(basis_.table(j), max_deg_[j], x, t.values[i][j]);
                }
            }
        }
        return t;
    }

    // With unit p_0 the factors outside the support are exactly 1, so the
    // product over the support reproduces the full tensor product bit-for-bit.
    double basis_value(const Tables& t, Eigen::Index i, std::size_t k) const
    {
        const auto& vi = t.values[static_cast<std::size_t>(i)];
        double v = 1.0;
        for (const auto& [axis, deg] : supports_[k])
            v *= vi[axis][static_cast<std::size_t>(deg)];
        return v;
    }

    double basis_partial(const Tables& t, Eigen::Index i, std::size_t k, std::size_t axis) const
    {
        const auto& vi = t.values[static_cast<std::size_t>(i)];
        const auto& di = t.derivs[static_cast<std::size_t>(i)];
        double v = 1.0;
        for (const auto& [ax, deg] : supports_[k])
            v *= (ax == axis) ? di[ax][static_cast<std::size_t>(deg)] : vi[ax][static_cast<std::size_t>(deg)];
        return v;
    }

    BasisFamily basis_;
    MultiIndexSet set_;
    DomainSpec domain_;
    double target_scale_ = 1.0;
    std::vector<int> max_deg_;
    bool sparse_ = true;
    std::vector<std::vector<std::pair<std::size_t, int>>> supports_;
};

/// Penalty-augmented residual and Jacobian:
///   R~ = [R; c P_1; ...; c P_(d+1)n],   J~ = [J; c dP_1/dd; ...].
struct AugmentedSystem
{
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;
    double moment_norm = 0.0;
};

inline AugmentedSystem augmented(const MomentSystem& sys, const DecisionVector& dv, double c)
{
    if (!(c > 0.0))
        throw std::invalid_argument("augmented: penalty constant must be positive");
    const Eigen::VectorXd R = sys.residual(dv);
    const Eigen::MatrixXd J = sys.jacobian(dv);
    const Eigen::VectorXd P = sys.penalties(dv);
    const Eigen::SparseMatrix<double> dP = sys.penalty_jacobian(dv);
    const auto M = R.size();
    const auto N = static_cast<Eigen::Index>(dv.size());
    AugmentedSystem out;
    out.residual.resize(M + N);
    out.residual << R, c * P;
    out.jacobian.resize(M + N, N);
    out.jacobian.topRows(M) = J;
    out.jacobian.bottomRows(N) = c * Eigen::MatrixXd(dP);
    out.moment_norm = R.norm();
    return out;
}

/// c_k = max(A, 1/||R||); A when the residual vanishes.
inline double penalty_constant(double residual_norm, double A = 1e3)
{
    if (residual_norm < 0.0)
        throw std::invalid_argument("penalty_constant: negative residual norm");
    if (residual_norm == 0.0)
        return A;
    return std::max(A, 1.0 / residual_norm);
}

} // namespace dquad

#endif // DQUAD_MOMENT_SYSTEM_HPP
