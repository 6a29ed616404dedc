#ifndef DQUAD_DOMAINS_HPP
#define DQUAD_DOMAINS_HPP

#include "dquad/ortho_basis.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dquad {

/// Axis-aligned infeasible box. Inside the box, every penalty axis carries
/// scale * depth^2, where depth is the distance to the nearest face normal to
/// a penalty axis, so nodes are pushed out only along those axes. A region
/// touching the domain boundary therefore cannot trap a node against it.
struct PenaltyRegion
{
    std::vector<std::pair<double, double>> ranges;
    std::vector<std::size_t> penalty_axes;
    double scale = 1.0;

    std::size_t dim() const { return ranges.size(); }

    bool contains(std::span<const double> x) const { return depth(x).value > 0.0; }

    /// Distance to the nearest penalty-axis face, the axis attaining it, and
    /// the sign of d(depth)/dx along that axis. Zero depth outside. A positive
    /// margin widens the box along its penalty axes.
    struct Depth
    {
        double value = 0.0;
        std::size_t axis = 0;
        double sign = 0.0;
    };

    Depth depth(std::span<const double> x, double margin = 0.0) const
    {
        for (std::size_t b = 0; b < ranges.size(); ++b) {
            const bool widened = std::find(penalty_axes.begin(), penalty_axes.end(), b) != penalty_axes.end();
            const double m = widened ? margin : 0.0;
            if (!(x[b] > ranges[b].first - m && x[b] < ranges[b].second + m))
                return {};
        }
        Depth out;
        out.value = std::numeric_limits<double>::infinity();
        for (std::size_t b : penalty_axes) {
            const double lo = x[b] - ranges[b].first + margin;
            const double hi = ranges[b].second + margin - x[b];
            if (lo < out.value)
                out = {lo, b, 1.0};
            if (hi < out.value)
                out = {hi, b, -1.0};
        }
        return out;
    }

    void validate(std::size_t d) const
    {
        if (ranges.size() != d)
            throw std::invalid_argument("PenaltyRegion: dimension mismatch");
        for (const auto& [lo, hi] : ranges)
            if (!(lo < hi))
                throw std::invalid_argument("PenaltyRegion: empty range");
        if (penalty_axes.empty())
            throw std::invalid_argument("PenaltyRegion: need at least one penalty axis");
        for (std::size_t a : penalty_axes)
            if (a >= d)
                throw std::invalid_argument("PenaltyRegion: penalty axis out of range");
        if (!(scale > 0.0))
            throw std::invalid_argument("PenaltyRegion: scale must be positive");
    }
};

enum class DomainKind { box, gaussian_unbounded };

/// Integration domain in reference coordinates (those the basis lives in).
struct DomainSpec
{
    DomainKind kind = DomainKind::box;
    std::vector<std::pair<double, double>> bounds;
    Family weight_family = Family::legendre;
    std::vector<PenaltyRegion> forbidden_regions;
    double weight_floor = 1e-6;
    /// Node penalties start this far inside the box faces and this far
    /// outside forbidden regions along their penalty axes.
    double node_margin = 0.0;

    std::size_t dim() const { return bounds.size(); }

    static DomainSpec box(std::size_t d, double lo = -1.0, double hi = 1.0, Family family = Family::legendre)
    {
        DomainSpec s;
        s.kind = DomainKind::box;
        s.bounds.assign(d, {lo, hi});
        s.weight_family = family;
        return s;
    }

    static DomainSpec gaussian(std::size_t d)
    {
        DomainSpec s;
        s.kind = DomainKind::gaussian_unbounded;
        // Bounds only carry the dimension for the unbounded kind.
        s.bounds.assign(d, {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()});
        s.weight_family = Family::hermite_probabilist;
        return s;
    }

    void validate() const
    {
        if (bounds.empty())
            throw std::invalid_argument("DomainSpec: dimension must be >= 1");
        if (kind == DomainKind::box)
            for (const auto& [lo, hi] : bounds)
                if (!(lo < hi))
                    throw std::invalid_argument("DomainSpec: lo < hi required per dimension");
        if (!(weight_floor > 0.0))
            throw std::invalid_argument("DomainSpec: weight_floor must be positive");
        for (const auto& r : forbidden_regions)
            r.validate(dim());
    }

    /// True when x lies in the box (if any) and outside every forbidden region.
    bool feasible(std::span<const double> x) const
    {
        if (kind == DomainKind::box)
            for (std::size_t j = 0; j < bounds.size(); ++j)
                if (x[j] < bounds[j].first || x[j] > bounds[j].second)
                    return false;
        for (const auto& r : forbidden_regions)
            if (r.contains(x))
                return false;
        return true;
    }
};

/// Moves nodes of X onto the feasible set: out of each forbidden region
/// along its nearest penalty axis, then into the box.
/// Returns the number of coordinates changed.
inline std::size_t project_feasible(const DomainSpec& dom, Eigen::MatrixXd& X)
{
    std::size_t moved = 0;
    std::vector<double> x(dom.dim());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = X(i, static_cast<Eigen::Index>(j));
        for (const auto& r : dom.forbidden_regions) {
            const auto dep = r.depth(x);
            if (dep.value > 0.0) {
                x[dep.axis] -= dep.sign * dep.value;
                ++moved;
            }
        }
        if (dom.kind == DomainKind::box)
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double c = std::clamp(x[j], dom.bounds[j].first, dom.bounds[j].second);
                if (c != x[j]) {
                    x[j] = c;
                    ++moved;
                }
            }
        for (std::size_t j = 0; j < x.size(); ++j)
            X(i, static_cast<Eigen::Index>(j)) = x[j];
    }
    return moved;
}

namespace detail {

inline double box_violation(const DomainSpec& dom, std::size_t j, double x)
{
    if (dom.kind != DomainKind::box)
        return 0.0;
    const double lo = dom.bounds[j].first + dom.node_margin;
    const double hi = dom.bounds[j].second - dom.node_margin;
    return std::max({0.0, x - hi, lo - x});
}

} // namespace detail

/// Per-coordinate penalties, node-major (node i, axis j at i*d + j).
/// X is n x d, one node per row.
inline Eigen::VectorXd node_penalties(const DomainSpec& dom, const Eigen::MatrixXd& X)
{
    const std::size_t d = dom.dim();
    const auto n = X.rows();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n * static_cast<Eigen::Index>(d));
    std::vector<double> x(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            x[j] = X(i, static_cast<Eigen::Index>(j));
        for (std::size_t j = 0; j < d; ++j) {
            const double v = detail::box_violation(dom, j, x[j]);
            p(i * static_cast<Eigen::Index>(d) + static_cast<Eigen::Index>(j)) = v * v;
        }
        for (const auto& r : dom.forbidden_regions) {
            const auto dep = r.depth(x, dom.node_margin);
            if (dep.value <= 0.0)
                continue;
            for (std::size_t a : r.penalty_axes)
                p(i * static_cast<Eigen::Index>(d) + static_cast<Eigen::Index>(a)) += r.scale * dep.value * dep.value;
        }
    }
    return p;
}

/// (max[0, floor - w_j])^2.
inline Eigen::VectorXd weight_penalties(const DomainSpec& dom, const Eigen::VectorXd& w)
{
    Eigen::VectorXd p(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double v = std::max(0.0, dom.weight_floor - w(i));
        p(i) = v * v;
    }
    return p;
}

/// Gradients of the (d+1)n penalties with respect to the decision vector
/// (coordinates node-major, then weights). Row k is the gradient of P_k.
inline Eigen::SparseMatrix<double> penalty_jacobian(const DomainSpec& dom, const Eigen::MatrixXd& X,
                                                    const Eigen::VectorXd& w)
{
    const auto d = static_cast<Eigen::Index>(dom.dim());
    const auto n = X.rows();
    const Eigen::Index nvar = (d + 1) * n;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> x(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            x[static_cast<std::size_t>(j)] = X(i, j);
        for (Eigen::Index j = 0; j < d; ++j) {
            if (dom.kind != DomainKind::box)
                break;
            const double xi = x[static_cast<std::size_t>(j)];
            const double lo = dom.bounds[static_cast<std::size_t>(j)].first + dom.node_margin;
            const double hi = dom.bounds[static_cast<std::size_t>(j)].second - dom.node_margin;
            const Eigen::Index k = i * d + j;
            if (xi > hi)
                trip.emplace_back(k, k, 2.0 * (xi - hi));
            else if (xi < lo)
                trip.emplace_back(k, k, -2.0 * (lo - xi));
        }
        for (const auto& r : dom.forbidden_regions) {
            const auto dep = r.depth(x, dom.node_margin);
            if (dep.value <= 0.0)
                continue;
            const double g = r.scale * 2.0 * dep.value * dep.sign;
            for (std::size_t a : r.penalty_axes)
                trip.emplace_back(i * d + static_cast<Eigen::Index>(a), i * d + static_cast<Eigen::Index>(dep.axis), g);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = dom.weight_floor - w(i);
        if (v > 0.0)
            trip.emplace_back(n * d + i, n * d + i, -2.0 * v);
    }
    Eigen::SparseMatrix<double> J(nvar, nvar);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

/// Forbidden-region list from JSON:
/// [{"ranges": [[lo, hi], ...], "penalty_axes": [0], "scale": 10}, ...]
inline std::vector<PenaltyRegion> parse_regions(const nlohmann::json& j)
{
    if (!j.is_array())
        throw std::runtime_error("region file: expected a JSON list of boxes");
    std::vector<PenaltyRegion> out;
    for (const auto& e : j) {
        PenaltyRegion r;
        for (const auto& rg : e.at("ranges"))
            r.ranges.emplace_back(rg.at(0).get<double>(), rg.at(1).get<double>());
        r.penalty_axes = e.at("penalty_axes").get<std::vector<std::size_t>>();
        r.scale = e.value("scale", 1.0);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<PenaltyRegion> read_regions_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open region file: " + path);
    try {
        return parse_regions(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("region file " + path + ": " + e.what());
    }
}

/// U-shaped feasible set inside [-1,1]^2: the slot between the two ascenders
/// (|x1| <= 0.4, -0.35 <= x2 <= 0.95) penalized along x1, plus two overlapping
/// boxes approximating the inner half-disc below it, penalized along both axes.
inline std::vector<PenaltyRegion> u_shape_regions(double scale = 10.0)
{
    return {
        PenaltyRegion{{{-0.4, 0.4}, {-0.35, 0.95}}, {0}, scale},
        PenaltyRegion{{{-0.35, 0.35}, {-0.55, -0.30}}, {0, 1}, scale},
        PenaltyRegion{{{-0.2, 0.2}, {-0.72, -0.50}}, {0, 1}, scale},
    };
}

} // namespace dquad

#endif // DQUAD_DOMAINS_HPP
