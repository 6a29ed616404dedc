#ifndef DQUAD_ORTHO_BASIS_HPP
#define DQUAD_ORTHO_BASIS_HPP

#include "dquad/index_sets.hpp"

#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dquad {

/// Classical families, each normalized to a probability weight:
///   legendre            uniform density on [-1,1]
///   hermite_probabilist standard normal density on R
///   chebyshev_first     arcsine density 1/(pi sqrt(1-x^2)) on [-1,1]
enum class Family { legendre, hermite_probabilist, chebyshev_first, custom };

inline std::string family_name(Family f)
{
    switch (f) {
    case Family::legendre: return "legendre";
    case Family::hermite_probabilist: return "hermite";
    case Family::chebyshev_first: return "chebyshev";
    case Family::custom: return "custom";
    }
    return "custom";
}

inline Family parse_family(const std::string& s)
{
    if (s == "legendre" || s == "uniform")
        return Family::legendre;
    if (s == "hermite" || s == "gaussian" || s == "normal")
        return Family::hermite_probabilist;
    if (s == "chebyshev")
        return Family::chebyshev_first;
    if (s == "custom")
        return Family::custom;
    throw std::invalid_argument("unknown polynomial family: " + s);
}

/// Coefficients of x p_m = sqrt(b_m) p_{m-1} + a_m p_m + sqrt(b_{m+1}) p_{m+1},
/// seeded by p_{-1} = 0 and p_0 = 1/sqrt(b_0).
struct RecurrenceTable
{
    Family family = Family::custom;
    std::vector<double> a;
    std::vector<double> b;

    std::size_t size() const { return a.size(); }

    /// Highest degree that can be evaluated (needs b_{m+1}).
    int max_degree() const { return static_cast<int>(a.size()) - 2; }

    double p0() const { return 1.0 / std::sqrt(b.at(0)); }

    void validate() const
    {
        if (a.size() != b.size() || a.size() < 2)
            throw std::invalid_argument("RecurrenceTable: need matching a/b tables of length >= 2");
        for (double v : b)
            if (!(v > 0.0))
                throw std::invalid_argument("RecurrenceTable: b_m must be positive");
    }
};

/// Table long enough to evaluate degrees 0..m_max.
inline RecurrenceTable standard_recurrence(Family family, int m_max)
{
    if (m_max < 0)
        throw std::invalid_argument("standard_recurrence: m_max must be >= 0");
    const std::size_t len = static_cast<std::size_t>(m_max) + 2;
    RecurrenceTable t;
    t.family = family;
    t.a.assign(len, 0.0);
    t.b.assign(len, 0.0);
    t.b[0] = 1.0;
    for (std::size_t m = 1; m < len; ++m) {
        const double md = static_cast<double>(m);
        switch (family) {
        case Family::legendre: t.b[m] = md * md / (4.0 * md * md - 1.0); break;
        case Family::hermite_probabilist: t.b[m] = md; break;
        case Family::chebyshev_first: t.b[m] = (m == 1) ? 0.5 : 0.25; break;
        case Family::custom: throw std::invalid_argument("standard_recurrence: custom family has no closed form");
        }
    }
    return t;
}

/// Reads "m a_m b_m" lines (m = 0, 1, 2, ... in order).
inline RecurrenceTable read_recurrence(std::istream& in)
{
    RecurrenceTable t;
    t.family = Family::custom;
    long m = 0;
    double a = 0, b = 0;
    while (in >> m >> a >> b) {
        if (m != static_cast<long>(t.a.size()))
            throw std::runtime_error("recurrence file: expected m = " + std::to_string(t.a.size()));
        t.a.push_back(a);
        t.b.push_back(b);
    }
    if (!in.eof())
        throw std::runtime_error("recurrence file: malformed line after m = " + std::to_string(m));
    t.validate();
    return t;
}

inline RecurrenceTable read_recurrence_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open recurrence file: " + path);
    return read_recurrence(in);
}

namespace detail {

inline void check_degree(const RecurrenceTable& rec, int m)
{
    if (m < 0 || m > rec.max_degree())
        throw std::out_of_range("degree " + std::to_string(m) + " exceeds recurrence table (max " +
                                std::to_string(rec.max_degree()) + ")");
}

} // namespace detail

/// Fills out[0..m] with p_0(x)..p_m(x).
inline void eval_univariate_all(const RecurrenceTable& rec, int m, double x, std::span<double> out)
{
    detail::check_degree(rec, m);
    double prev = 0.0, cur = rec.p0();
    out[0] = cur;
    for (int k = 0; k < m; ++k) {
        const double next = ((x - rec.a[k]) * cur - std::sqrt(rec.b[k]) * prev) / std::sqrt(rec.b[k + 1]);
        prev = cur;
        cur = next;
        out[k + 1] = cur;
    }
}

/// Fills values[0..m] and derivs[0..m] with p_k(x) and p_k'(x), using
/// sqrt(b_{k+1}) p'_{k+1} = (x - a_k) p'_k - sqrt(b_k) p'_{k-1} + p_k.
inline void eval_univariate_with_derivative(const RecurrenceTable& rec, int m, double x, std::span<double> values,
                                            std::span<double> derivs)
{
    detail::check_degree(rec, m);
    double prev = 0.0, cur = rec.p0();
    double dprev = 0.0, dcur = 0.0;
    values[0] = cur;
    derivs[0] = 0.0;
    for (int k = 0; k < m; ++k) {
        const double sb = std::sqrt(rec.b[k]);
        const double sb1 = std::sqrt(rec.b[k + 1]);
        const double next = ((x - rec.a[k]) * cur - sb * prev) / sb1;
        const double dnext = ((x - rec.a[k]) * dcur - sb * dprev + cur) / sb1;
        prev = cur;
        cur = next;
        dprev = dcur;
        dcur = dnext;
        values[k + 1] = cur;
        derivs[k + 1] = dcur;
    }
}

/// Orthonormal p_m(x) by forward recurrence.
inline double eval_univariate(const RecurrenceTable& rec, int m, double x)
{
    std::vector<double> v(static_cast<std::size_t>(std::max(m, 0)) + 1);
    eval_univariate_all(rec, m, x, v);
    return v[static_cast<std::size_t>(m)];
}

inline double eval_univariate_derivative(const RecurrenceTable& rec, int m, double x)
{
    const std::size_t n = static_cast<std::size_t>(std::max(m, 0)) + 1;
    std::vector<double> v(n), dv(n);
    eval_univariate_with_derivative(rec, m, x, v, dv);
    return dv[static_cast<std::size_t>(m)];
}

/// Tensor-product orthonormal basis pi_alpha(x) = prod_j p^{(j)}_{alpha_j}(x_j).
class BasisFamily
{
public:
    BasisFamily() = default;

    explicit BasisFamily(std::vector<RecurrenceTable> per_dimension) : tables_(std::move(per_dimension))
    {
        if (tables_.empty())
            throw std::invalid_argument("BasisFamily: need at least one dimension");
        pi0_ = 1.0;
        for (const auto& t : tables_) {
            t.validate();
            pi0_ *= t.p0();
        }
    }

    /// Same classical family in every dimension, evaluable up to degree max_degree.
    static BasisFamily isotropic(Family family, std::size_t dim, int max_degree)
    {
        return BasisFamily(std::vector<RecurrenceTable>(dim, standard_recurrence(family, max_degree)));
    }

    static BasisFamily isotropic(const RecurrenceTable& table, std::size_t dim)
    {
        return BasisFamily(std::vector<RecurrenceTable>(dim, table));
    }

    std::size_t dim() const { return tables_.size(); }
    double pi0() const { return pi0_; }
    const RecurrenceTable& table(std::size_t j) const { return tables_.at(j); }
    Family family() const { return tables_.empty() ? Family::custom : tables_.front().family; }

    /// Lowest per-axis degree limit.
    int max_degree() const
    {
        int m = tables_.front().max_degree();
        for (const auto& t : tables_)
            m = std::min(m, t.max_degree());
        return m;
    }

    /// True when every p_0 equals one exactly (probability-normalized weights).
    bool unit_p0() const
    {
        for (const auto& t : tables_)
            if (t.b[0] != 1.0)
                return false;
        return true;
    }

private:
    std::vector<RecurrenceTable> tables_;
    double pi0_ = 1.0;
};

namespace detail {

inline void check_point(const BasisFamily& basis, const MultiIndex& alpha, std::span<const double> x)
{
    if (alpha.dim() != basis.dim() || x.size() != basis.dim())
        throw std::invalid_argument("basis evaluation: dimension mismatch");
}

} // namespace detail

inline double eval_multivariate(const BasisFamily& basis, const MultiIndex& alpha, std::span<const double> x)
{
    detail::check_point(basis, alpha, x);
    double v = 1.0;
    for (std::size_t j = 0; j < basis.dim(); ++j)
        v *= eval_univariate(basis.table(j), alpha[j], x[j]);
    return v;
}

/// d pi_alpha / d x_axis.
inline double eval_multivariate_partial(const BasisFamily& basis, const MultiIndex& alpha, std::span<const double> x,
                                        std::size_t axis)
{
    detail::check_point(basis, alpha, x);
    if (axis >= basis.dim())
        throw std::out_of_range("eval_multivariate_partial: axis out of range");
    double v = 1.0;
    for (std::size_t j = 0; j < basis.dim(); ++j)
        v *= (j == axis) ? eval_univariate_derivative(basis.table(j), alpha[j], x[j])
                         : eval_univariate(basis.table(j), alpha[j], x[j]);
    return v;
}

} // namespace dquad

#endif // DQUAD_ORTHO_BASIS_HPP
