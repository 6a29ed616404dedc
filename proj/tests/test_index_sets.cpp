#include "dquad/index_sets.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <bit>
#include <set>
#include <sstream>

using namespace dquad;

namespace {

// Independent count of {alpha : |alpha| <= r} by recursion over coordinates.
long long count_total(std::size_t d, int r)
{
    if (d == 0)
        return 1;
    long long c = 0;
    for (int a = 0; a <= r; ++a)
        c += count_total(d - 1, r - a);
    return c;
}

// Largest |Theta| with Theta + Theta in s over all subsets of s.
std::size_t brute_half_set(const MultiIndexSet& s)
{
    const auto& idx = s.indices();
    const std::size_t m = idx.size();
    REQUIRE(m <= 20);
    std::size_t best = 0;
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        const auto c = static_cast<std::size_t>(std::popcount(mask));
        if (c <= best)
            continue;
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i)
            for (std::size_t k = i; k < m && ok; ++k)
                if ((mask >> i & 1u) && (mask >> k & 1u) && !s.contains(idx[i] + idx[k]))
                    ok = false;
        if (ok)
            best = c;
    }
    return best;
}

} // namespace

TEST_CASE("total degree sets", "[index_sets]")
{
    CHECK(total_degree(2, 2).size() == 6);
    CHECK(total_degree(3, 5).size() == 56);

    const auto s = total_degree(1, 5);
    REQUIRE(s.size() == 6);
    for (int k = 0; k <= 5; ++k)
        CHECK(s[static_cast<std::size_t>(k)] == MultiIndex{k});

    for (std::size_t d = 1; d <= 4; ++d)
        for (int r = 0; r <= 8; ++r) {
            const auto t = total_degree(d, r);
            CHECK(static_cast<long long>(t.size()) == binomial(static_cast<long long>(d) + r, r));
            CHECK(static_cast<long long>(t.size()) == count_total(d, r));
            CHECK(is_downward_closed(t));
            for (const auto& a : t)
                CHECK(a.order() <= r);
        }
}

TEST_CASE("graded ordering puts zero first and is deterministic", "[index_sets]")
{
    const auto a = total_degree(3, 4);
    const auto b = total_degree(3, 4);
    CHECK(a == b);
    CHECK(a[0].is_zero());
    for (std::size_t k = 1; k < a.size(); ++k)
        CHECK(a[k - 1].order() <= a[k].order());

    // Same content from a shuffled list lands in the same order.
    std::vector<MultiIndex> v = a.indices();
    std::reverse(v.begin(), v.end());
    CHECK(MultiIndexSet(3, v) == a);
}

TEST_CASE("hyperbolic cross sets", "[index_sets]")
{
    const auto h = hyperbolic_cross(2, 1);
    CHECK(h.size() == 3);
    CHECK(h.contains(MultiIndex{0, 0}));
    CHECK(h.contains(MultiIndex{1, 0}));
    CHECK(h.contains(MultiIndex{0, 1}));

    for (int r = 0; r <= 6; ++r)
        CHECK(hyperbolic_cross(1, r) == total_degree(1, r));

    CHECK(hyperbolic_cross(100, 4).size() == 5351);

    for (std::size_t d = 1; d <= 5; ++d)
        for (int r = 0; r <= 6; ++r) {
            const auto s = hyperbolic_cross(d, r);
            CHECK(is_downward_closed(s));
            for (const auto& a : s) {
                int prod = 1;
                for (int e : a.exponents())
                    prod *= e + 1;
                CHECK(prod <= r + 1);
            }
        }
    CHECK(is_downward_closed(hyperbolic_cross(5, 4)));
}

TEST_CASE("pairwise interaction sets", "[index_sets]")
{
    const auto p = pairwise_interaction(3, 1);
    CHECK(p.size() == 7);
    CHECK(p.contains(MultiIndex{1, 1, 0}));
    CHECK_FALSE(p.contains(MultiIndex{1, 1, 1}));

    std::vector<MultiIndex> t;
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            t.push_back(MultiIndex{a, b});
    CHECK(pairwise_interaction(2, 2) == MultiIndexSet(2, t));
    CHECK_THROWS_AS(pairwise_interaction(1, 2), std::invalid_argument);
}

TEST_CASE("union with the d = 100 pairwise set", "[index_sets]")
{
    const std::size_t d = 100;
    const auto u = set_union(hyperbolic_cross(d, 4), pairwise_interaction(d, 2));
    // Counted by support pattern: zero; singletons 1..4; pairs with entries in {1,2}.
    const long long expected = 1 + 4 * 100 + binomial(100, 2) * 4;
    CHECK(static_cast<long long>(u.size()) == expected);
    for (const auto& a : u) {
        int nz = 0, mx = 0, prod = 1;
        for (int e : a.exponents()) {
            nz += e > 0;
            mx = std::max(mx, e);
            prod *= e + 1;
        }
        CHECK((prod <= 5 || (nz <= 2 && mx <= 2)));
    }
}

TEST_CASE("union and Minkowski sum", "[index_sets]")
{
    const auto t2 = total_degree(2, 2);
    CHECK(set_union(t2, t2) == t2);
    CHECK(set_union(total_degree(2, 1), t2) == t2);
    CHECK_THROWS_AS(set_union(t2, total_degree(3, 2)), std::invalid_argument);

    const MultiIndexSet zero(1, {MultiIndex{0}});
    CHECK(minkowski_sum(zero, zero) == zero);
    const MultiIndexSet zo(1, {MultiIndex{0}, MultiIndex{1}});
    CHECK(minkowski_sum(zo, zo) == total_degree(1, 2));
    CHECK(minkowski_sum(t2, t2) == total_degree(2, 4));
    CHECK_THROWS_AS(minkowski_sum(t2, zero), std::invalid_argument);

    for (std::size_t d = 1; d <= 3; ++d)
        for (int a = 0; a <= 4; ++a)
            for (int b = 0; b <= 4; ++b)
                CHECK(minkowski_sum(total_degree(d, a), total_degree(d, b)) == total_degree(d, a + b));
}

TEST_CASE("downward closedness", "[index_sets]")
{
    for (std::size_t d = 1; d <= 4; ++d)
        CHECK(is_downward_closed(total_degree(d, 3)));
    CHECK_FALSE(is_downward_closed(MultiIndexSet(2, {MultiIndex{0, 0}, MultiIndex{1, 1}})));
}

TEST_CASE("half-set size", "[index_sets]")
{
    CHECK(half_set_size(total_degree(3, 5)) == 10);
    for (std::size_t d = 1; d <= 5; ++d)
        CHECK(half_set_size(total_degree(d, 2)) == d + 1);

    const auto h3 = hyperbolic_cross(2, 3);
    CHECK(half_set_size(h3) == brute_half_set(h3));
    CHECK(half_set_size(total_degree(2, 4)) == brute_half_set(total_degree(2, 4)));
    CHECK(half_set_size(hyperbolic_cross(3, 3)) == brute_half_set(hyperbolic_cross(3, 3)));

    for (std::size_t d = 1; d <= 3; ++d)
        for (int r = 0; r <= 6; ++r)
            CHECK(static_cast<long long>(half_set_size(total_degree(d, r))) == half_set_lower_bound_total(d, r));

    CHECK_THROWS_AS(half_set_size(total_degree(4, 6)), std::length_error);
    CHECK(half_set_size(total_degree(4, 6), 300) == 35);
}

TEST_CASE("half-set closed form", "[index_sets]")
{
    CHECK(half_set_lower_bound_total(3, 5) == 10);
    CHECK(half_set_lower_bound_total(4, 8) == 70);
    for (int n = 1; n <= 10; ++n)
        CHECK(half_set_lower_bound_total(1, 2 * n - 1) == n);
}

TEST_CASE("multi-index validation", "[index_sets]")
{
    CHECK_THROWS_AS(MultiIndex({1, -1}), std::invalid_argument);
    CHECK_THROWS_AS(MultiIndexSet(0), std::invalid_argument);
    CHECK_THROWS_AS(MultiIndexSet(2, {MultiIndex{0}}), std::invalid_argument);
    CHECK_THROWS(total_degree(0, 2));
    CHECK_THROWS(total_degree(2, -1));
}

TEST_CASE("index-set file round trip", "[index_sets]")
{
    const auto s = hyperbolic_cross(3, 4);
    std::stringstream io;
    write_index_set(io, s);
    CHECK(read_index_set(io) == s);

    std::stringstream bad("2 3\n0 0\n1 0\n");
    CHECK_THROWS_AS(read_index_set(bad), std::runtime_error);
    std::stringstream neg("1 2\n0\n-1\n");
    CHECK_THROWS_AS(read_index_set(neg), std::runtime_error);
    std::stringstream dup("1 2\n0\n0\n");
    CHECK_THROWS_AS(read_index_set(dup), std::runtime_error);
}
