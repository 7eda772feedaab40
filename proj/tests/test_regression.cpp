#include "bsei/regression.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bsei;

namespace {

Eigen::MatrixXd normals(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

}  // namespace

TEST_CASE("polynomial basis enumerates monomials by total degree") {
    const PolynomialBasis b(2, 2);
    CHECK(b.size() == 6);
    CHECK(b.exponents().front() == std::vector<unsigned>{0, 0});
    const double x[2] = {2.0, 3.0};
    double out[6];
    b.evaluate(x, out);
    double sum = 0;
    for (double v : out) sum += v;
    CHECK(sum == doctest::Approx(1 + 2 + 3 + 4 + 6 + 9));
    CHECK(PolynomialBasis(3, 3).size() == 20);
}

TEST_CASE("targets inside the span are reproduced exactly") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = normals(rng, 1, 500);
    Eigen::MatrixXd t(2, 500);
    t.row(0) = (1.0 + 2.0 * x.array() + 3.0 * x.array().square()).matrix();
    t.row(1) = (-4.0 * x.array()).matrix();
    const RegressionResult r = conditional_expectation(t, x, 2);
    CHECK((r.fitted - t).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK_FALSE(r.ridge_used);
}

TEST_CASE("independent noise averages out") {
    std::mt19937_64 rng(2);
    const std::size_t m = 20000;
    const Eigen::MatrixXd x = normals(rng, 1, m);
    const Eigen::MatrixXd noise = normals(rng, 1, m);
    const Eigen::MatrixXd t = x + noise;
    const RegressionResult r = conditional_expectation(t, x, 1);
    // Two fitted coefficients, each with standard error ~1/sqrt(M).
    CHECK(std::sqrt((r.fitted - x).squaredNorm() / m) <= 5.0 * std::sqrt(2.0 / m));
}

TEST_CASE("tower property for nested feature sets") {
    std::mt19937_64 rng(3);
    const std::size_t m = 2000;
    const Eigen::MatrixXd x = normals(rng, 2, m);
    Eigen::MatrixXd y(1, m);
    for (std::size_t i = 0; i < m; ++i) {
        const double a = x(0, i), b = x(1, i);
        y(0, i) = std::sin(a) * std::cos(b) + a * b * b;
    }
    const Eigen::MatrixXd inner = conditional_expectation(y, x, 2).fitted;
    const Eigen::MatrixXd outer = conditional_expectation(inner, x.topRows(1), 2).fitted;
    const Eigen::MatrixXd direct = conditional_expectation(y, x.topRows(1), 2).fitted;
    CHECK((outer - direct).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("collinear features trigger the ridge, constant features are dropped") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd x = normals(rng, 1, 300);
    Eigen::MatrixXd dup(2, 300);
    dup << x, x;
    const RegressionResult r = conditional_expectation(x, dup, 2);
    CHECK(r.ridge_used);
    CHECK((r.fitted - x).cwiseAbs().maxCoeff() <= 1e-6);

    Eigen::MatrixXd with_const(2, 300);
    with_const << x, Eigen::MatrixXd::Constant(1, 300, 5.0);
    const RegressionResult c = conditional_expectation(x, with_const, 2);
    CHECK_FALSE(c.ridge_used);
    CHECK((c.fitted - x).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("too few paths for the design is an input error") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd x = normals(rng, 2, 40);  // degree 2 in 2 features: 6 functions, needs 60 paths
    CHECK_THROWS_AS(conditional_expectation(x.topRows(1), x, 2), InputError);
    CHECK_THROWS_AS(conditional_expectation(x.leftCols(10), x, 1), InputError);
}

TEST_CASE("joint regression recovers the increment coefficient") {
    const TimeGrid grid(1.0, 4);
    const BrownianEnsemble bm = simulate_brownian(grid, 400, 6);
    const std::size_t k = 2;
    const auto w = bm.values(k);
    const auto dw = bm.increments(k);
    Eigen::MatrixXd feat(1, 400), target(1, 400), b(1, 400);
    for (std::size_t m = 0; m < 400; ++m) {
        feat(0, m) = w[m];
        b(0, m) = 2.0 + w[m];
        target(0, m) = 1.0 - w[m] * w[m] + b(0, m) * dw[m];
    }
    const Regressor reg(feat, 2, dw, grid.dt());
    const Regressor::Fit fit = reg.fit(target);
    CHECK((fit.slope - b).cwiseAbs().maxCoeff() <= 1e-9);
    for (std::size_t m = 0; m < 400; ++m) CHECK(fit.mean(0, m) == doctest::Approx(1.0 - w[m] * w[m]).epsilon(1e-9));
}

TEST_CASE("representation of a linear functional of W is exact") {
    const TimeGrid grid(1.0, 10);
    const std::size_t paths = 2000;
    const BrownianEnsemble bm = simulate_brownian(grid, paths, 8);
    const RegressionCache regs(bm, 2);
    Eigen::MatrixXd g(2, paths);
    for (std::size_t m = 0; m < paths; ++m) {
        g(0, m) = 3.0 * bm.values(10)[m];
        g(1, m) = -1.0 * bm.values(10)[m];
    }
    std::size_t visited = 0;
    double worst = 0.0;
    Eigen::MatrixXd base;
    const double residual = represent_target(
        g, 10, 4, bm, regs,
        [&](std::size_t s, const Eigen::MatrixXd& tau) {
            CHECK(s >= 4);
            CHECK(s < 10);
            ++visited;
            worst = std::max(worst, (tau.row(0).array() - 3.0).abs().maxCoeff());
            worst = std::max(worst, (tau.row(1).array() + 1.0).abs().maxCoeff());
        },
        &base);
    CHECK(visited == 6);
    CHECK(worst <= 1e-9);
    CHECK(residual <= 1e-10);
    for (std::size_t m = 0; m < paths; ++m) CHECK(base(0, m) == doctest::Approx(3.0 * bm.values(4)[m]));
}

TEST_CASE("representation of W squared") {
    const TimeGrid grid(1.0, 10);
    const std::size_t paths = 20000;
    const BrownianEnsemble bm = simulate_brownian(grid, paths, 9);
    ProcessEnsemble g(grid, paths, 1);
    for (std::size_t k = 0; k < grid.nodes(); ++k)
        for (std::size_t m = 0; m < paths; ++m) g.slice(k)(0, m) = bm.values(k)[m] * bm.values(k)[m];
    const MartingaleRepresentation rep = martingale_representation(g, bm, 2);
    CHECK(rep.kernel.stored_pairs() == 55);
    for (std::size_t u = 1; u <= 10; ++u) {
        CHECK(rep.mean_part(0, u) == doctest::Approx(grid.time(u)).epsilon(0.05));
        // The quadratic-variation error sum (dW^2 - dt) is left in the residual.
        CHECK(rep.residual[u] <= 3.0 * std::sqrt(2.0 * u) * grid.dt());
    }
    double err = 0.0, ref = 0.0;
    for (std::size_t s = 0; s < 10; ++s)
        for (std::size_t m = 0; m < paths; ++m) {
            const double exact = 2.0 * bm.values(s)[m];
            err += std::pow(rep.kernel.at(10, s)(0, m) - exact, 2);
            ref += 4.0 * grid.time(s) + grid.dt();
        }
    CHECK(std::sqrt(err / ref) <= 0.05);
    CHECK_THROWS_AS(martingale_representation(ProcessEnsemble(grid, paths, 1, 1), bm, 2), ContractError);
}
