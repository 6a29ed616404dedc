#ifndef DQUAD_INDEX_SETS_HPP
#define DQUAD_INDEX_SETS_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dquad {

/// A d-variate exponent tuple (alpha_1, ..., alpha_d), all components >= 0.
class MultiIndex
{
public:
    MultiIndex() = default;

    explicit MultiIndex(std::size_t dim) : exps_(dim, 0) {}

    MultiIndex(std::initializer_list<int> exps) : exps_(exps) { validate(); }

    explicit MultiIndex(std::vector<int> exps) : exps_(std::move(exps)) { validate(); }

    std::size_t dim() const { return exps_.size(); }
    int operator[](std::size_t j) const { return exps_[j]; }
    int& operator[](std::size_t j) { return exps_[j]; }
    const std::vector<int>& exponents() const { return exps_; }

    int order() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

    int max_component() const
    {
        return exps_.empty() ? 0 : *std::max_element(exps_.begin(), exps_.end());
    }

    bool is_zero() const
    {
        return std::all_of(exps_.begin(), exps_.end(), [](int e) { return e == 0; });
    }

    /// Positions with nonzero exponent, ascending.
    std::vector<std::size_t> support() const
    {
        std::vector<std::size_t> s;
        for (std::size_t j = 0; j < exps_.size(); ++j)
            if (exps_[j] != 0)
                s.push_back(j);
        return s;
    }

    /// Component-wise partial order: this <= other.
    bool precedes(const MultiIndex& other) const
    {
        for (std::size_t j = 0; j < exps_.size(); ++j)
            if (exps_[j] > other.exps_[j])
                return false;
        return true;
    }

    MultiIndex operator+(const MultiIndex& other) const
    {
        if (other.dim() != dim())
            throw std::invalid_argument("MultiIndex: dimension mismatch");
        MultiIndex out(*this);
        for (std::size_t j = 0; j < exps_.size(); ++j)
            out.exps_[j] += other.exps_[j];
        return out;
    }

    friend bool operator==(const MultiIndex& a, const MultiIndex& b) { return a.exps_ == b.exps_; }
    friend bool operator!=(const MultiIndex& a, const MultiIndex& b) { return !(a == b); }

    std::string to_string() const
    {
        std::ostringstream os;
        os << '(';
        for (std::size_t j = 0; j < exps_.size(); ++j)
            os << (j ? "," : "") << exps_[j];
        os << ')';
        return os.str();
    }

private:
    void validate() const
    {
        for (int e : exps_)
            if (e < 0)
                throw std::invalid_argument("MultiIndex: negative exponent");
    }

    std::vector<int> exps_;
};

/// Graded order: by total order, then lexicographically larger first, so that
/// (1,0) precedes (0,1). The zero index is always first.
struct GradedOrder
{
    bool operator()(const MultiIndex& a, const MultiIndex& b) const
    {
        const int oa = a.order(), ob = b.order();
        if (oa != ob)
            return oa < ob;
        return a.exponents() > b.exponents();
    }
};

/// Ordered, duplicate-free set of multi-indices of a common dimension.
class MultiIndexSet
{
public:
    MultiIndexSet() = default;

    explicit MultiIndexSet(std::size_t dim) : dim_(dim)
    {
        if (dim == 0)
            throw std::invalid_argument("MultiIndexSet: dimension must be >= 1");
    }

    MultiIndexSet(std::size_t dim, std::vector<MultiIndex> indices) : MultiIndexSet(dim)
    {
        for (const auto& a : indices)
            if (a.dim() != dim)
                throw std::invalid_argument("MultiIndexSet: index " + a.to_string() + " has wrong dimension");
        indices_ = std::move(indices);
        normalize();
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    const MultiIndex& operator[](std::size_t k) const { return indices_[k]; }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    bool contains(const MultiIndex& a) const
    {
        return a.dim() == dim_ && std::binary_search(indices_.begin(), indices_.end(), a, GradedOrder{});
    }

    /// Position of a in the ordering, or size() when absent.
    std::size_t position(const MultiIndex& a) const
    {
        auto it = std::lower_bound(indices_.begin(), indices_.end(), a, GradedOrder{});
        if (it == indices_.end() || *it != a)
            return indices_.size();
        return static_cast<std::size_t>(it - indices_.begin());
    }

    bool contains_zero() const { return !indices_.empty() && indices_.front().is_zero(); }

    int max_order() const
    {
        return indices_.empty() ? 0 : indices_.back().order();
    }

    int max_component() const
    {
        int m = 0;
        for (const auto& a : indices_)
            m = std::max(m, a.max_component());
        return m;
    }

    friend bool operator==(const MultiIndexSet& a, const MultiIndexSet& b)
    {
        return a.dim_ == b.dim_ && a.indices_ == b.indices_;
    }

private:
    void normalize()
    {
        std::sort(indices_.begin(), indices_.end(), GradedOrder{});
        indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    }

    std::size_t dim_ = 0;
    std::vector<MultiIndex> indices_;
};

namespace detail {

inline void require_dim(std::size_t d)
{
    if (d == 0)
        throw std::invalid_argument("index set dimension must be >= 1");
}

} // namespace detail

/// All alpha with |alpha| <= r.
inline MultiIndexSet total_degree(std::size_t d, int r)
{
    detail::require_dim(d);
    if (r < 0)
        throw std::invalid_argument("total_degree: order must be >= 0");
    std::vector<MultiIndex> out;
    MultiIndex cur(d);
    int used = 0;
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
        if (j == d) {
            out.push_back(cur);
            return;
        }
        for (int v = 0; used + v <= r; ++v) {
            cur[j] = v;
            used += v;
            rec(j + 1);
            used -= v;
        }
        cur[j] = 0;
    };
    rec(0);
    return MultiIndexSet(d, std::move(out));
}

/// All alpha with prod_j (alpha_j + 1) <= r + 1.
inline MultiIndexSet hyperbolic_cross(std::size_t d, int r)
{
    detail::require_dim(d);
    if (r < 0)
        throw std::invalid_argument("hyperbolic_cross: order must be >= 0");
    std::vector<MultiIndex> out;
    MultiIndex cur(d);
    long long prod = 1;
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
        if (j == d) {
            out.push_back(cur);
            return;
        }
        for (int v = 0; prod * (v + 1) <= r + 1; ++v) {
            cur[j] = v;
            prod *= (v + 1);
            rec(j + 1);
            prod /= (v + 1);
        }
        cur[j] = 0;
    };
    rec(0);
    return MultiIndexSet(d, std::move(out));
}

/// Indices with at most two nonzero components: single-axis indices up to
/// max_univariate_order, two-axis indices with each component <= pair_order.
inline MultiIndexSet pairwise_interaction(std::size_t d, int max_univariate_order, int pair_order)
{
    if (d < 2)
        throw std::invalid_argument("pairwise_interaction: dimension must be >= 2");
    if (max_univariate_order < 0 || pair_order < 0)
        throw std::invalid_argument("pairwise_interaction: orders must be >= 0");
    std::vector<MultiIndex> out;
    out.emplace_back(d);
    for (std::size_t i = 0; i < d; ++i)
        for (int v = 1; v <= max_univariate_order; ++v) {
            MultiIndex a(d);
            a[i] = v;
            out.push_back(a);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            for (int u = 1; u <= pair_order; ++u)
                for (int v = 1; v <= pair_order; ++v) {
                    MultiIndex a(d);
                    a[i] = u;
                    a[j] = v;
                    out.push_back(a);
                }
    return MultiIndexSet(d, std::move(out));
}

inline MultiIndexSet pairwise_interaction(std::size_t d, int order)
{
    return pairwise_interaction(d, order, order);
}

inline MultiIndexSet set_union(const MultiIndexSet& a, const MultiIndexSet& b)
{
    if (a.dim() != b.dim())
        throw std::invalid_argument("set_union: dimension mismatch");
    std::vector<MultiIndex> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return MultiIndexSet(a.dim(), std::move(all));
}

/// {alpha + beta : alpha in a, beta in b}.
inline MultiIndexSet minkowski_sum(const MultiIndexSet& a, const MultiIndexSet& b)
{
    if (a.dim() != b.dim())
        throw std::invalid_argument("minkowski_sum: dimension mismatch");
    std::vector<MultiIndex> all;
    all.reserve(a.size() * b.size());
    for (const auto& x : a)
        for (const auto& y : b)
            all.push_back(x + y);
    return MultiIndexSet(a.dim(), std::move(all));
}

inline bool is_downward_closed(const MultiIndexSet& s)
{
    // Checking the immediate predecessors alpha - e_j suffices by induction.
    for (const auto& a : s) {
        for (std::size_t j = 0; j < a.dim(); ++j) {
            if (a[j] == 0)
                continue;
            MultiIndex b(a);
            b[j] -= 1;
            if (!s.contains(b))
                return false;
        }
    }
    return true;
}

inline long long binomial(long long n, long long k)
{
    if (k < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (long long i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

/// Closed-form maximal half-set size of a total-degree set: C(d + floor(r/2), d).
inline long long half_set_lower_bound_total(std::size_t d, int r)
{
    detail::require_dim(d);
    if (r < 0)
        throw std::invalid_argument("half_set_lower_bound_total: order must be >= 0");
    return binomial(static_cast<long long>(d) + r / 2, static_cast<long long>(d));
}

/// Maximal |Theta| with Theta + Theta contained in s.
///
/// Candidates are restricted to {alpha : 2 alpha in s}; an optimal Theta can
/// always be taken downward closed, so the branch-and-bound search only grows
/// downward-closed sets in graded order.
inline std::size_t half_set_size(const MultiIndexSet& s, std::size_t size_cap = 200)
{
    if (s.size() > size_cap)
        throw std::length_error("half_set_size: search infeasible for |set| = " + std::to_string(s.size()) +
                                " (cap " + std::to_string(size_cap) + ")");
    if (!s.contains_zero())
        return 0;

    std::vector<MultiIndex> cand;
    for (const auto& a : s)
        if (s.contains(a + a))
            cand.push_back(a);
    const std::size_t m = cand.size();

    // compat[i][k]: cand[i] + cand[k] in s.
    std::vector<std::vector<char>> compat(m, std::vector<char>(m, 0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
            compat[i][k] = s.contains(cand[i] + cand[k]) ? 1 : 0;

    // preds[i]: positions of the immediate predecessors of cand[i].
    std::vector<std::vector<std::size_t>> preds(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < cand[i].dim(); ++j) {
            if (cand[i][j] == 0)
                continue;
            MultiIndex b(cand[i]);
            b[j] -= 1;
            auto it = std::find(cand.begin(), cand.end(), b);
            preds[i].push_back(static_cast<std::size_t>(it - cand.begin()));
        }

    std::vector<char> chosen(m, 0);
    std::size_t best = 0, count = 0;
    std::function<void(std::size_t)> search = [&](std::size_t i) {
        if (count + (m - i) <= best)
            return;
        if (i == m) {
            best = count;
            return;
        }
        bool ok = true;
        for (std::size_t p : preds[i])
            if (!chosen[p]) {
                ok = false;
                break;
            }
        if (ok && compat[i][i]) {
            for (std::size_t k = 0; k < i && ok; ++k)
                if (chosen[k] && !compat[i][k])
                    ok = false;
        }
        if (ok) {
            chosen[i] = 1;
            ++count;
            search(i + 1);
            --count;
            chosen[i] = 0;
        }
        search(i + 1);
    };
    search(0);
    return best;
}

/// Reads the plain-text index-set format: first line "d M", then M lines of d
/// non-negative integers.
inline MultiIndexSet read_index_set(std::istream& in)
{
    std::size_t d = 0, m = 0;
    if (!(in >> d >> m) || d == 0)
        throw std::runtime_error("index-set file: malformed header");
    std::vector<MultiIndex> idx;
    idx.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<int> e(d);
        for (auto& v : e)
            if (!(in >> v) || v < 0)
                throw std::runtime_error("index-set file: malformed entry on index " + std::to_string(k + 1));
        idx.emplace_back(std::move(e));
    }
    MultiIndexSet s(d, std::move(idx));
    if (s.size() != m)
        throw std::runtime_error("index-set file: duplicate indices");
    return s;
}

inline MultiIndexSet read_index_set_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open index-set file: " + path);
    return read_index_set(in);
}

inline void write_index_set(std::ostream& out, const MultiIndexSet& s)
{
    out << s.dim() << ' ' << s.size() << '\n';
    for (const auto& a : s) {
        for (std::size_t j = 0; j < a.dim(); ++j)
            out << (j ? " " : "") << a[j];
        out << '\n';
    }
}

} // namespace dquad

#endif // DQUAD_INDEX_SETS_HPP
