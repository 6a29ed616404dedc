#include "dquad/designer.hpp"
#include "dquad/verifier.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

using namespace dquad;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DesignConfig config(std::uint64_t seed, double tol = 1e-8)
{
    DesignConfig c;
    c.seed = seed;
    c.tol = tol;
    return c;
}

// The invariants every designed rule must satisfy.
void check_rule(const QuadratureRule& rule, const MultiIndexSet& set, const DomainSpec& dom, const BasisFamily& basis,
                double tol)
{
    CHECK(rule.weights.minCoeff() > 0.0);
    CHECK_THAT(rule.weights.sum(), WithinAbs(1.0, 1e-12));
    CHECK(rule.size() >= static_cast<std::size_t>(half_set_lower_bound_total(set.dim(), set.max_order())));
    const auto rep = exactness(rule, set, basis);
    CHECK(rep.max_error <= 10.0 * tol);
    CHECK(rule.achieved_residual <= tol);
    if (dom.kind == DomainKind::box) {
        MomentSystem sys(basis, set, dom);
        CHECK(sys.penalties(DecisionVector(reference_nodes(rule), rule.weights)).norm() == 0.0);
    }
}

std::size_t designed_size(std::size_t d, int r, std::uint64_t seeds)
{
    const auto set = total_degree(d, r);
    const auto basis = BasisFamily::isotropic(Family::legendre, d, r + 1);
    std::size_t best = 0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        try {
            const auto res = design(set, DomainSpec::box(d), basis, config(s));
            if (best == 0 || res.rule.size() < best)
                best = res.rule.size();
        } catch (const DesignFailure&) {
        }
    }
    return best;
}

} // namespace

TEST_CASE("sparse-grid size estimate", "[designer]")
{
    CHECK(sparse_grid_size_formula(3, 3) == 18);
    CHECK(sparse_grid_size_formula(5, 1) == 1);
    CHECK(sparse_grid_size_formula(100, 2) == 200);
    for (int n = 1; n <= 8; ++n)
        CHECK(estimate_sparse_grid_size(1, n) == static_cast<std::size_t>(n));
    CHECK(estimate_sparse_grid_size(3, 3) == smolyak(Family::legendre, 3, 3).size());
    CHECK(estimate_sparse_grid_size(100, 3) == sparse_grid_size_formula(100, 3));
    CHECK_THROWS_AS(sparse_grid_size_formula(2, 0), std::invalid_argument);

    CHECK(sparse_grid_level(total_degree(3, 5)) == 3);
    CHECK(sparse_grid_level(total_degree(3, 6)) == 4);
    CHECK(sparse_grid_level(total_degree(3, 1)) == 1);
}

TEST_CASE("initialization", "[designer]")
{
    const auto dom = DomainSpec::box(2);
    const auto a = initialize(3, dom, total_degree(2, 2), 42);
    const auto b = initialize(3, dom, total_degree(2, 2), 42);
    CHECK(a.values() == b.values());
    CHECK(a.values() != initialize(3, dom, total_degree(2, 2), 43).values());
    for (Eigen::Index i = 0; i < 3; ++i)
        CHECK_THAT(a.weights()(i), WithinAbs(2.0, 1e-15));

    // One node per stratum along every axis.
    const std::size_t n = 50;
    const auto lh = initialize(n, DomainSpec::box(3), 1.0, 9);
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<int> strata;
        for (std::size_t i = 0; i < n; ++i)
            strata.push_back(static_cast<int>(std::floor((lh.coord(i, j) + 1.0) / 2.0 * static_cast<double>(n))));
        std::sort(strata.begin(), strata.end());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(strata[i] == static_cast<int>(i));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(lh.coord(i, j) > -1.0);
            CHECK(lh.coord(i, j) < 1.0);
        }
    }

    const auto g = initialize(4, DomainSpec::gaussian(2), 6.0, 5);
    CHECK_THAT(g.weights().sum(), WithinRel(6.0, 1e-14));
    const double ratio = g.weights()(0) / std::exp(-0.5 * g.nodes().row(0).squaredNorm());
    for (Eigen::Index i = 1; i < 4; ++i)
        CHECK_THAT(g.weights()(i) / std::exp(-0.5 * g.nodes().row(i).squaredNorm()), WithinRel(ratio, 1e-12));

    DomainSpec ud = DomainSpec::box(2);
    ud.forbidden_regions = u_shape_regions();
    const auto u = initialize(40, ud, 1.0, 3);
    for (std::size_t i = 0; i < 40; ++i)
        CHECK(ud.feasible(std::vector<double>{u.coord(i, 0), u.coord(i, 1)}));

    CHECK_THROWS_AS(initialize(0, dom, 1.0, 0), std::invalid_argument);
}

TEST_CASE("elimination", "[designer]")
{
    Eigen::MatrixXd X(3, 1);
    X << 0.1, 0.2, 0.3;
    Eigen::Vector3d w(3, 2, 1);
    const DecisionVector dv(X, w);
    CHECK(eliminate(dv, 0, 6.0).values() == dv.values());

    const auto one = eliminate(dv, 1, 6.0);
    REQUIRE(one.n() == 2);
    CHECK(one.coord(0, 0) == 0.1);
    CHECK(one.coord(1, 0) == 0.2);
    CHECK_THAT(one.weights().sum(), WithinRel(6.0, 1e-15));
    CHECK_THAT(one.weights()(0) / one.weights()(1), WithinRel(1.5, 1e-15));

    Eigen::Vector3d tie(1, 2, 1);
    const auto t = eliminate(DecisionVector(X, tie), 1, 4.0);
    CHECK(t.coord(0, 0) == 0.1);
    CHECK(t.coord(1, 0) == 0.2);

    CHECK_THROWS_AS(eliminate(dv, 3, 6.0), std::invalid_argument);
}

TEST_CASE("enrichment", "[designer]")
{
    const auto dom = DomainSpec::box(2);
    const auto base = initialize(5, dom, 10.0, 1);
    const auto a = enrich(base, 1, dom, 10.0, 77);
    REQUIRE(a.n() == 6);
    CHECK(a.nodes().topRows(5) == base.nodes());
    CHECK_THAT(a.weights().sum(), WithinRel(10.0, 1e-14));
    CHECK(enrich(base, 1, dom, 10.0, 77).values() == a.values());
    CHECK(enrich(base, 3, dom, 10.0, 77).n() == 8);
    CHECK_THROWS_AS(enrich(base, 0, dom, 10.0, 77), std::invalid_argument);
}

TEST_CASE("design: d = 2 total degree 2", "[designer]")
{
    const auto set = total_degree(2, 2);
    const auto dom = DomainSpec::box(2);
    const auto basis = BasisFamily::isotropic(Family::legendre, 2, 3);
    const auto res = design(set, dom, basis, config(0));
    CHECK(res.rule.size() == 3);
    check_rule(res.rule, set, dom, basis, 1e-8);
    CHECK_FALSE(res.history.empty());
    CHECK(res.trace.outcome == SolveOutcome::converged);

    // Determinism.
    const auto again = design(set, dom, basis, config(0));
    CHECK(again.rule == res.rule);
}

TEST_CASE("design: known optimal sizes in low dimension", "[designer]")
{
    for (std::size_t d = 2; d <= 4; ++d) {
        CHECK(designed_size(d, 2, 5) == d + 1);
        CHECK(designed_size(d, 3, 5) == 2 * d);
    }
}

TEST_CASE("design: Gaussian weight", "[designer]")
{
    const auto set = total_degree(2, 3);
    const auto dom = DomainSpec::gaussian(2);
    const auto basis = BasisFamily::isotropic(Family::hermite_probabilist, 2, 4);
    const auto res = design(set, dom, basis, config(1));
    check_rule(res.rule, set, dom, basis, 1e-8);
    CHECK(res.rule.domain == DomainKind::gaussian_unbounded);
    CHECK(res.rule.bounds.empty());
}

TEST_CASE("design: forbidden regions leave every node feasible", "[designer]")
{
    DomainSpec dom = DomainSpec::box(2);
    dom.forbidden_regions = u_shape_regions();
    const auto basis = BasisFamily::isotropic(Family::legendre, 2, 3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = config(seed, 2e-2);
        cfg.initial_size = 150;
        const auto res = design(total_degree(2, 2), dom, basis, cfg);
        CHECK(res.rule.size() <= 150);
        CHECK(res.rule.achieved_residual <= 2e-2);
        for (Eigen::Index i = 0; i < res.rule.nodes.rows(); ++i)
            CHECK(dom.feasible(std::vector<double>{res.rule.nodes(i, 0), res.rule.nodes(i, 1)}));
    }

    // A slab spanning the box, touching two faces.
    DomainSpec slab = DomainSpec::box(2);
    slab.forbidden_regions.push_back(PenaltyRegion{{{-0.2, 0.2}, {-1.0, 1.0}}, {0}, 1.0});
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto res = design(total_degree(2, 2), slab, basis, config(seed));
        CHECK(res.rule.size() == 3);
        for (Eigen::Index i = 0; i < res.rule.nodes.rows(); ++i)
            CHECK(std::abs(res.rule.nodes(i, 0)) >= 0.2);
    }
}

TEST_CASE("design: fixed size from given nodes", "[designer]")
{
    const auto set = total_degree(1, 5);
    const auto basis = BasisFamily::isotropic(Family::legendre, 1, 6);
    DesignConfig c = config(0);
    Eigen::MatrixXd X(3, 1);
    X << -0.7, 0.1, 0.6;
    c.initial_nodes = X;
    c.fixed_size = true;
    const auto res = design(set, DomainSpec::box(1), basis, c);
    REQUIRE(res.rule.size() == 3);
    const auto g = gauss_rule(Family::legendre, 3);
    std::vector<double> nodes(res.rule.nodes.data(), res.rule.nodes.data() + 3);
    std::sort(nodes.begin(), nodes.end());
    for (std::size_t q = 0; q < 3; ++q)
        CHECK_THAT(nodes[q], WithinAbs(g.nodes[q], 1e-7));

    // Two nodes cannot integrate degree five.
    c.initial_nodes = Eigen::MatrixXd(X.topRows(2));
    c.solver.max_iters = 200;
    try {
        design(set, DomainSpec::box(1), basis, c);
        FAIL("expected a design failure");
    } catch (const DesignFailure& e) {
        CHECK_FALSE(e.best_trace().records.empty());
        CHECK(e.history().size() == 1);
    }
}

TEST_CASE("design: failure carries the best trace", "[designer]")
{
    DesignConfig c = config(0);
    c.initial_size = 2;
    c.max_size = 2;
    c.solver.max_iters = 100;
    try {
        design(total_degree(2, 3), DomainSpec::box(2), BasisFamily::isotropic(Family::legendre, 2, 4), c);
        FAIL("expected a design failure");
    } catch (const DesignFailure& e) {
        CHECK(e.best_trace().outcome != SolveOutcome::converged);
        CHECK_FALSE(e.history().empty());
    }
}

TEST_CASE("design: cancellation and validation", "[designer]")
{
    const auto set = total_degree(2, 2);
    const auto basis = BasisFamily::isotropic(Family::legendre, 2, 3);
    std::stop_source src;
    src.request_stop();
    DesignConfig c = config(0);
    c.stop = src.get_token();
    CHECK_THROWS_AS(design(set, DomainSpec::box(2), basis, c), DesignCancelled);

    DesignConfig bad = config(0);
    bad.kappa_min = 0.95;
    CHECK_THROWS_AS(design(set, DomainSpec::box(2), basis, bad), std::invalid_argument);
    CHECK_THROWS_AS(design(MultiIndexSet(2, {MultiIndex{0, 0}, MultiIndex{2, 0}}), DomainSpec::box(2), basis, config(0)),
                    std::invalid_argument);
}

TEST_CASE("multi-seed design is deterministic", "[designer]")
{
    const auto set = total_degree(3, 3);
    const auto basis = BasisFamily::isotropic(Family::legendre, 3, 4);
    const std::vector<std::uint64_t> seeds{11, 12, 13};
    const auto one = design_multi_seed(set, DomainSpec::box(3), basis, config(0), seeds, 1);
    const auto many = design_multi_seed(set, DomainSpec::box(3), basis, config(0), seeds, 3);
    CHECK(one.rule == many.rule);
    CHECK(std::find(seeds.begin(), seeds.end(), one.rule.seed) != seeds.end());
    CHECK(one.rule == design(set, DomainSpec::box(3), basis, config(one.rule.seed)).rule);
    CHECK_THROWS_AS(design_multi_seed(set, DomainSpec::box(3), basis, config(0), {}), std::invalid_argument);
}

TEST_CASE("rule files round-trip exactly", "[designer]")
{
    auto& eng = testing::rng();
    QuadratureRule r;
    r.dim = 3;
    r.nodes = testing::random_matrix(7, 3, eng);
    r.weights = testing::random_vector(7, 0.01, 0.3, eng);
    r.index_set = "total:4";
    r.bounds = {{0.0, 1.0}, {-1.0, 1.0}, {-2.5, 3.0}};
    r.tolerance = 1e-8;
    r.achieved_residual = 3.3e-9;
    r.seed = 12345678901234ULL;

    CHECK(rule_from_json(nlohmann::json::parse(rule_to_json(r).dump())) == r);

    std::stringstream csv;
    write_rule_csv(csv, r);
    const auto back = read_rule_csv(csv);
    CHECK(back.nodes == r.nodes);
    CHECK(back.weights == r.weights);
    CHECK(back.dim == 3);

    const auto dir = std::filesystem::temp_directory_path() / "dquad_rule_io";
    std::filesystem::create_directories(dir);
    write_rule_file((dir / "r.json").string(), r);
    CHECK(read_rule_file((dir / "r.json").string()) == r);
    write_rule_file((dir / "r.csv").string(), r);
    CHECK(read_rule_file((dir / "r.csv").string()).weights == r.weights);
    std::filesystem::remove_all(dir);

    std::stringstream ragged("0.1,0.2,0.5\n0.3,0.5\n");
    CHECK_THROWS_AS(read_rule_csv(ragged), std::runtime_error);
    std::stringstream junk("0.1,abc\n");
    CHECK_THROWS_AS(read_rule_csv(junk), std::runtime_error);
    std::stringstream empty("");
    CHECK_THROWS_AS(read_rule_csv(empty), std::runtime_error);
    CHECK_THROWS_AS(rule_from_json(nlohmann::json::parse(R"({"nodes": [[0.1]], "weights": [0.5, 0.5]})")),
                    std::runtime_error);
    CHECK_THROWS_AS(read_rule_file("/nonexistent/rule.json"), std::runtime_error);
}

TEST_CASE("user and reference coordinates", "[designer]")
{
    QuadratureRule r;
    r.dim = 2;
    r.nodes = Eigen::MatrixXd(1, 2);
    r.nodes << 0.25, 0.5;
    r.weights = Eigen::VectorXd::Ones(1);
    r.bounds = {{0.0, 1.0}, {-1.0, 1.0}};
    const auto ref = reference_nodes(r);
    CHECK(ref(0, 0) == -0.5);
    CHECK(ref(0, 1) == 0.5);
    CHECK((user_nodes(ref, r.bounds) - r.nodes).norm() == 0.0);
}
