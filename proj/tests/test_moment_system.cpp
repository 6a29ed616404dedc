#include "dquad/designer.hpp"
#include "dquad/moment_system.hpp"
#include "dquad/sparse_grid.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace dquad;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MomentSystem legendre_system(std::size_t d, int r)
{
    return MomentSystem(BasisFamily::isotropic(Family::legendre, d, r + 1), total_degree(d, r), DomainSpec::box(d));
}

DecisionVector random_point(std::size_t n, std::size_t d, double spread, std::mt19937_64& eng)
{
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < X.size(); ++i)
        X.data()[i] = testing::uniform(-spread, spread, eng);
    return DecisionVector(X, testing::random_vector(static_cast<Eigen::Index>(n), 0.05, 0.5, eng));
}

} // namespace

TEST_CASE("decision vector layout", "[moment_system]")
{
    Eigen::MatrixXd X(2, 3);
    X << 1, 2, 3, 4, 5, 6;
    Eigen::VectorXd w(2);
    w << 7, 8;
    const DecisionVector dv(X, w);
    Eigen::VectorXd expected(8);
    expected << 1, 2, 3, 4, 5, 6, 7, 8;
    CHECK(dv.values() == expected);
    CHECK(dv.nodes() == X);
    CHECK(dv.coord(1, 2) == 6.0);
    CHECK(dv.size() == 8);
    CHECK_THROWS_AS(DecisionVector(X, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("vandermonde matrix", "[moment_system]")
{
    const auto sys1 = legendre_system(1, 1);
    const auto V1 = sys1.vandermonde(Eigen::MatrixXd::Constant(1, 1, 0.5));
    REQUIRE(V1.rows() == 2);
    REQUIRE(V1.cols() == 1);
    CHECK(V1(0, 0) == 1.0);
    CHECK_THAT(V1(1, 0), WithinAbs(0.8660254037844386, 1e-15));

    auto& eng = testing::rng();
    const auto sys = legendre_system(2, 3);
    const auto X = random_point(7, 2, 1.0, eng).nodes();
    const auto V = sys.vandermonde(X);
    CHECK(V.rows() == 10);
    CHECK(V.cols() == 7);
    CHECK(V.row(0).isOnes());
    const auto& t = sys.basis().table(0);
    for (std::size_t k = 0; k < sys.size(); ++k) {
        const auto& a = sys.index_set()[k];
        for (Eigen::Index j = 0; j < X.rows(); ++j)
            CHECK_THAT(V(static_cast<Eigen::Index>(k), j),
                       WithinAbs(eval_univariate(t, a[0], X(j, 0)) * eval_univariate(t, a[1], X(j, 1)), 1e-14));
    }
}

TEST_CASE("residual examples", "[moment_system]")
{
    const auto sys = legendre_system(1, 1);
    const auto r0 = sys.residual(DecisionVector(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1)));
    CHECK(r0.isZero(0.0));
    const auto r1 = sys.residual(DecisionVector(Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Ones(1)));
    CHECK(r1(0) == 0.0);
    CHECK_THAT(r1(1), WithinAbs(0.8660254, 1e-7));

    const auto table = read_rule_file(testing::data_path("uniform_d4_r6_n43.csv"));
    const auto sys4 = legendre_system(4, 6);
    CHECK(sys4.residual(DecisionVector(table.nodes, table.weights)).norm() <= 1e-4);
}

TEST_CASE("embedded Gauss rules are exact", "[moment_system]")
{
    for (int n = 1; n <= 12; ++n) {
        const auto g = gauss_rule(Family::legendre, n);
        const auto sys = legendre_system(1, 2 * n - 1);
        const Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(g.nodes.data(), n);
        const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(g.weights.data(), n);
        CHECK(sys.residual(DecisionVector(X, w)).norm() <= 1e-12);
    }
}

TEST_CASE("jacobian structure and finite differences", "[moment_system]")
{
    auto& eng = testing::rng();
    const auto sys = legendre_system(2, 3);
    const auto dv = random_point(5, 2, 0.9, eng);
    const auto J = sys.jacobian(dv);
    REQUIRE(J.rows() == 10);
    REQUIRE(J.cols() == 15);
    CHECK(J.rightCols(5) == sys.vandermonde(dv.nodes()));
    CHECK(J.row(0).head(10).isZero(0.0));

    const auto fd = testing::fd_jacobian(
        [&](const Eigen::VectorXd& v) {
            DecisionVector p(5, 2);
            p.values() = v;
            return sys.residual(p);
        },
        dv.values());
    CHECK((J - fd).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((Eigen::MatrixXd(sys.jacobian_sparse(dv)) - J).cwiseAbs().maxCoeff() <= 1e-14);

    // Directional derivatives.
    for (int t = 0; t < 5; ++t) {
        const Eigen::VectorXd v = testing::random_vector(15, -1, 1, eng);
        const double h = 1e-6;
        DecisionVector p = dv, m = dv;
        p.values() += h * v;
        m.values() -= h * v;
        const Eigen::VectorXd dir = (sys.residual(p) - sys.residual(m)) / (2 * h);
        CHECK((dir - J * v).norm() <= 1e-6 * std::max(1.0, dir.norm()));
    }
}

TEST_CASE("augmented system", "[moment_system]")
{
    auto& eng = testing::rng();
    const auto sys = legendre_system(2, 2);
    const auto feasible = random_point(4, 2, 0.9, eng);
    const auto a = augmented(sys, feasible, 1e3);
    CHECK(a.residual.head(6) == sys.residual(feasible));
    CHECK(a.residual.tail(12).isZero(0.0));

    DecisionVector bad = random_point(4, 2, 1.5, eng);
    bad.weights()(1) = -0.3;
    const double c = 250.0;
    const auto b = augmented(sys, bad, c);
    const double lhs = b.residual.squaredNorm() - sys.residual(bad).squaredNorm();
    CHECK_THAT(lhs, WithinRel(c * c * sys.penalties(bad).squaredNorm(), 1e-12));
    CHECK(sys.penalties(bad).squaredNorm() > 0.0);

    const auto fd = testing::fd_jacobian(
        [&](const Eigen::VectorXd& v) {
            DecisionVector p(4, 2);
            p.values() = v;
            return augmented(sys, p, c).residual;
        },
        bad.values(), 1e-7);
    CHECK((b.jacobian - fd).cwiseAbs().maxCoeff() <= 1e-6 * c);
    CHECK_THROWS_AS(augmented(sys, bad, 0.0), std::invalid_argument);
}

TEST_CASE("penalty constant", "[moment_system]")
{
    CHECK(penalty_constant(10.0) == 1000.0);
    CHECK_THAT(penalty_constant(1e-5), WithinRel(1e5, 1e-12));
    CHECK(penalty_constant(1e-3, 1e3) == 1000.0);
    CHECK(penalty_constant(0.0) == 1000.0);
    CHECK_THROWS_AS(penalty_constant(-1.0), std::invalid_argument);
}

TEST_CASE("residual bounds the integration error of polynomials in the span", "[moment_system]")
{
    auto& eng = testing::rng();
    const auto table = read_rule_file(testing::data_path("uniform_d4_r6_n43.csv"));
    const auto sys = legendre_system(4, 6);
    const double eps = sys.residual(DecisionVector(table.nodes, table.weights)).norm();
    const auto oracle = oracle_rule(sys.basis(), 12);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd coef = testing::random_vector(static_cast<Eigen::Index>(sys.size()), -1, 1, eng);
        coef.normalize();  // unit L2 norm under the weight
        auto f = [&](std::span<const double> x) {
            double v = 0.0;
            for (std::size_t k = 0; k < sys.size(); ++k)
                v += coef(static_cast<Eigen::Index>(k)) * eval_multivariate(sys.basis(), sys.index_set()[k], x);
            return v;
        };
        const double exact = integrate(oracle, f);
        CHECK_THAT(exact, WithinAbs(coef(0), 1e-12));
        const double approx = integrate(PointRule{table.nodes, table.weights}, f);
        CHECK(std::abs(exact - approx) <= eps * 1.0 + 1e-15);
    }
}

TEST_CASE("system construction errors", "[moment_system]")
{
    const auto basis = BasisFamily::isotropic(Family::legendre, 2, 2);
    CHECK_THROWS_AS(MomentSystem(basis, total_degree(2, 3), DomainSpec::box(2)), std::invalid_argument);
    CHECK_THROWS_AS(MomentSystem(basis, total_degree(3, 1), DomainSpec::box(3)), std::invalid_argument);
    CHECK_THROWS_AS(MomentSystem(basis, MultiIndexSet(2, {MultiIndex{1, 0}}), DomainSpec::box(2)), std::invalid_argument);
}
