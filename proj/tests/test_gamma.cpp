#include "bsei/gamma.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bsei;

namespace {

StateVector vec(std::initializer_list<double> xs) {
    StateVector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

/// Hilbert-Schmidt norm of sum_j h_j (x) e_j from the Gram matrix of the h_j.
double hs_norm(const FiniteRankOperator& op) {
    double sq = 0.0;
    const auto& terms = op.terms();
    for (const auto& a : terms)
        for (const auto& b : terms) sq += (op.weights().array() * a.h.array() * b.h.array()).sum() * a.e.dot(b.e);
    return std::sqrt(sq);
}

}  // namespace

TEST_CASE("indicator operator: exact value is sqrt(|A|) |e|") {
    const auto op = indicator_operator(0.0, 1.0, 1000, {{0.2, 0.7}}, vec({3.0, 4.0}));
    const GammaNormResult r = gamma_norm(op, 20000, 1);
    CHECK(r.exact == doctest::Approx(std::sqrt(0.5) * 5.0).epsilon(1e-12));
    CHECK(r.rank == 1);
    CHECK(std::abs(r.estimate - r.exact) <= 4.0 * r.standard_error);
    CHECK(r.standard_error > 0.0);
}

TEST_CASE("indicator of a union of intervals") {
    const auto op = indicator_operator(1.0, 3.0, 400, {{1.0, 1.5}, {2.0, 2.25}}, vec({1.0}));
    CHECK(gamma_norm(op, 10, 1).exact == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
    CHECK_THROWS_AS(indicator_operator(0.0, 1.0, 10, {{0.5, 1.5}}, vec({1.0})), InputError);
}

TEST_CASE("orthogonal terms add in quadrature") {
    const std::size_t n = 100;
    Eigen::VectorXd left = Eigen::VectorXd::Zero(n), right = Eigen::VectorXd::Zero(n);
    left.head(50).setOnes();
    right.tail(50).setOnes();
    const auto op = FiniteRankOperator::on_uniform_grid(0.0, 1.0, n,
                                                        {{left, vec({1.0, 0.0})}, {right, vec({0.0, 2.0})}});
    const GammaNormResult r = gamma_norm(op, 20000, 2);
    CHECK(r.exact == doctest::Approx(std::sqrt(0.5 * 1.0 + 0.5 * 4.0)).epsilon(1e-12));
    CHECK(r.rank == 2);
    CHECK_FALSE(r.dependent_terms);
    CHECK(std::abs(r.estimate - r.exact) <= 4.0 * r.standard_error);
}

TEST_CASE("repeated functions are merged") {
    const Eigen::VectorXd h = Eigen::VectorXd::Ones(50);
    const auto op = FiniteRankOperator::on_uniform_grid(0.0, 2.0, 50, {{h, vec({1.0, 0.0})}, {2.0 * h, vec({0.0, 1.0})}});
    const GammaNormResult r = gamma_norm(op, 100, 3);
    CHECK(r.dependent_terms);
    CHECK(r.rank == 1);
    // Operator is 1 (x) (1, 2) on [0, 2].
    CHECK(r.exact == doctest::Approx(std::sqrt(2.0 * 5.0)).epsilon(1e-12));
}

TEST_CASE("general finite-rank operators match the Gram-matrix value") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 200, terms = 1 + trial % 4;
        const Eigen::VectorXd nodes = FiniteRankOperator::uniform_nodes(0.0, 1.0, n);
        std::vector<RankOneTerm> t;
        for (std::size_t j = 0; j < terms; ++j) {
            const double a = g(rng), b = g(rng), c = g(rng);
            Eigen::VectorXd h = (a + b * nodes.array() + c * nodes.array().square()).matrix();
            t.push_back({h, vec({g(rng), g(rng), g(rng)})});
        }
        const auto op = FiniteRankOperator::on_uniform_grid(0.0, 1.0, n, t);
        CHECK(gamma_norm(op, 10, 1).exact == doctest::Approx(hs_norm(op)).epsilon(1e-10));

        // Remixing the terms by an orthogonal matrix leaves the operator unchanged.
        const Eigen::MatrixXd q =
            Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::NullaryExpr(terms, terms, [&] { return g(rng); }))
                .householderQ();
        std::vector<RankOneTerm> mixed;
        for (std::size_t j = 0; j < terms; ++j) {
            RankOneTerm m{Eigen::VectorXd::Zero(n), StateVector::Zero(3)};
            for (std::size_t i = 0; i < terms; ++i) {
                m.h += q(j, i) * t[i].h;
                m.e += q(j, i) * t[i].e;
            }
            mixed.push_back(m);
        }
        const auto op2 = FiniteRankOperator::on_uniform_grid(0.0, 1.0, n, mixed);
        CHECK(gamma_norm(op2, 10, 1).exact == doctest::Approx(gamma_norm(op, 10, 1).exact).epsilon(1e-10));
    }
}

TEST_CASE("operator validation") {
    CHECK_THROWS_AS(FiniteRankOperator::on_uniform_grid(0.0, 1.0, 5, {}), InputError);
    CHECK_THROWS_AS(FiniteRankOperator::on_uniform_grid(1.0, 1.0, 5, {{Eigen::VectorXd::Ones(5), vec({1.0})}}),
                    InputError);
    CHECK_THROWS_AS(FiniteRankOperator::on_uniform_grid(0.0, 1.0, 5, {{Eigen::VectorXd::Ones(4), vec({1.0})}}),
                    InputError);
    const auto op = FiniteRankOperator::on_uniform_grid(0.0, 1.0, 5, {{Eigen::VectorXd::Ones(5), vec({1.0})}});
    CHECK_THROWS_AS(gamma_norm(op, 0, 1), InputError);
}

TEST_CASE("Riemann integral on the grid and bounded operators") {
    const TimeGrid grid(1.0, 10);
    Eigen::MatrixXd f(2, 11);
    for (std::size_t k = 0; k <= 10; ++k) {
        f(0, k) = grid.time(k);
        f(1, k) = 1.0;
    }
    const StateVector i = kw_integral(grid, f, 0.2, 0.6);
    // Left sum over nodes 0.2, 0.3, 0.4, 0.5.
    CHECK(i[0] == doctest::Approx(0.1 * (0.2 + 0.3 + 0.4 + 0.5)).epsilon(1e-14));
    CHECK(i[1] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK_THROWS_AS(kw_integral(grid, f, 0.6, 0.2), InputError);
    CHECK_THROWS_AS(kw_integral(grid, f, 0.25, 0.6), InputError);

    Eigen::MatrixXd b(3, 2);
    b << 1, 2, -1, 0, 0.5, 3;
    const auto [lhs, rhs] = bounded_operator_pushthrough(b, grid, f, 0.0, 1.0);
    CHECK((lhs - rhs).norm() <= 1e-13);
    CHECK((rhs - b * kw_integral(grid, f, 0.0, 1.0)).norm() <= 1e-13);
}

TEST_CASE("Ito isometry for a deterministic integrand") {
    const TimeGrid grid(1.0, 20);
    const std::size_t paths = 20000;
    const BrownianEnsemble bm = simulate_brownian(grid, paths, 21);
    ProcessEnsemble phi(grid, paths, 2);
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        phi.slice(k).row(0).setConstant(std::cos(grid.time(k)));
        phi.slice(k).row(1).setConstant(1.0);
    }
    const ItoIsomorphismReport r = ito_isomorphism_report(phi, bm, 2.0);
    CHECK(std::abs(r.ratio - 1.0) <= 4.0 * r.standard_error);
    CHECK(r.standard_error < 0.02);
    CHECK_FALSE(r.degenerate);

    const ItoIsomorphismReport z = ito_isomorphism_report(ProcessEnsemble(grid, paths, 1), bm, 2.0);
    CHECK(z.degenerate);
    CHECK(z.ratio == 1.0);
    CHECK_THROWS_AS(ito_isomorphism_report(phi, bm, 1.0), InputError);
}
