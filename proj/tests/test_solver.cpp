#include "bsei/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace bsei;

namespace {

StateVector vec(std::initializer_list<double> xs) {
    StateVector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Eigen::MatrixXd diag(std::initializer_list<double> xs) { return vec(xs).asDiagonal(); }

BSEIProblem make_problem(double horizon, Eigen::MatrixXd a, TerminalSpec xi, SetValuedSpec g) {
    return BSEIProblem(horizon, 2.0, Generator(std::move(a)), std::move(xi), std::move(g));
}

SetValuedSpec constant_point(const StateVector& c) {
    const auto d = c.size();
    return SetValuedSpec({c}, Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d), SingletonShape{}, 0.0);
}

SolverOptions small_options() {
    SolverOptions o;
    o.steps_per_window = 10;
    o.paths = 2000;
    o.seed = 3;
    o.tol = 1e-8;
    return o;
}

}  // namespace

TEST_CASE("schedule examples") {
    // L = 1, gamma = 1, T = 1: beta = 1 + 1 * 2 = 3, delta = 1/36.
    const PicardSchedule s = compute_schedule(1.0, 1.0, 1.0, 1.0, 25, 1e-3);
    CHECK(s.beta == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(s.delta == doctest::Approx(1.0 / 36.0).epsilon(1e-14));
    CHECK(s.margin() <= 0.5);
    CHECK(s.windows == 36);
    CHECK(s.window_length * 36 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.eps(2) == doctest::Approx(std::pow(0.5 * s.margin(), 2)));

    const PicardSchedule z = compute_schedule(2.0, 0.0, 1.0, 1.0, 25, 1e-3);
    CHECK(z.beta == 0.0);
    CHECK(z.delta == doctest::Approx(0.5));
    CHECK(z.windows == 1);

    // Small beta: delta is capped at T / 4.
    const PicardSchedule c = compute_schedule(1.0, 0.01, 1.0, 1.0, 25, 1e-3);
    CHECK(c.delta == doctest::Approx(0.25));
    CHECK(c.windows == 4);

    CHECK_THROWS_AS(compute_schedule(-1.0, 1.0, 1.0, 1.0, 25, 1e-3), InputError);
    CHECK_THROWS_AS(compute_schedule(1.0, 1.0, 0.5, 1.0, 25, 1e-3), InputError);
    CHECK_THROWS_AS(compute_schedule(1.0, 1.0, 1.0, 1.0, 0, 1e-3), InputError);
    CHECK_THROWS_AS(compute_schedule(1.0, 1e6, 1.0, 1.0, 25, 1e-3), InputError);
}

TEST_CASE("problem validation") {
    const TerminalSpec xi{TerminalSpec::Kind::constant, vec({1.0})};
    CHECK_THROWS_AS(BSEIProblem(1.0, 1.0, Generator(diag({0.0})), xi, constant_point(vec({0.0}))), InputError);
    CHECK_THROWS_AS(BSEIProblem(0.0, 2.0, Generator(diag({0.0})), xi, constant_point(vec({0.0}))), InputError);
    CHECK_THROWS_AS(BSEIProblem(1.0, 2.0, Generator(diag({0.0, 0.0})), xi, constant_point(vec({0.0, 0.0}))),
                    InputError);
}

TEST_CASE("selection projects onto the generator values") {
    const TimeGrid grid(1.0, 4);
    ProcessEnsemble g(grid, 3, 2), y(grid, 3, 2), z(grid, 3, 2);
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        g.slice(k).setConstant(2.0);
        y.slice(k).setConstant(1.0);
    }
    const SetValuedSpec point({vec({0.5, -0.5})}, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2),
                              SingletonShape{}, 1.0);
    const ProcessEnsemble sel = select_generator(g, y, z, point);
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        CHECK((sel.slice(k).row(0).array() == 1.5).all());
        CHECK((sel.slice(k).row(1).array() == 0.5).all());
    }
    const SetValuedSpec ball({vec({0.0, 0.0})}, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                             BallShape{1.0}, 0.0);
    const ProcessEnsemble b = select_generator(g, y, z, ball);
    CHECK(b.slice(2)(0, 1) == doctest::Approx(std::sqrt(0.5)));
    CHECK_THROWS_AS(select_generator(ProcessEnsemble(grid, 3, 2, 1), y, z, ball), ContractError);
}

TEST_CASE("linear equation with a constant terminal value") {
    const TimeGrid grid(1.0, 20);
    const BrownianEnsemble bm = simulate_brownian(grid, 500, 1);
    const SemigroupCache cache(Generator(diag({-1.0, 0.5})), grid.dt(), grid.steps());
    const ProcessEnsemble g(grid, 500, 2);
    const Eigen::MatrixXd xi = vec({1.0, 2.0}).replicate(1, 500);
    const auto [y, z] = solve_linear_bsee(g, xi, cache, bm, 2);
    for (std::size_t k = 0; k <= 20; ++k) {
        const double tau = 1.0 - grid.time(k);
        CHECK(y.slice(k)(0, 7) == doctest::Approx(std::exp(-tau)).epsilon(1e-12));
        CHECK(y.slice(k)(1, 7) == doctest::Approx(2.0 * std::exp(0.5 * tau)).epsilon(1e-12));
        CHECK(z.slice(k).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("linear equation with a linear terminal value and a constant driver") {
    const TimeGrid grid(2.0, 16);
    const std::size_t paths = 500;
    const BrownianEnsemble bm = simulate_brownian(grid, paths, 2);
    const double a = -0.3;
    const SemigroupCache cache(Generator(diag({a})), grid.dt(), grid.steps());
    ProcessEnsemble g(grid, paths, 1);
    for (std::size_t k = 0; k < grid.nodes(); ++k) g.slice(k).setConstant(0.25);
    Eigen::MatrixXd xi(1, paths);
    for (std::size_t m = 0; m < paths; ++m) xi(0, m) = bm.values(16)[m];
    const auto [y, z] = solve_linear_bsee(g, xi, cache, bm, 2);
    // Discrete solution: Y_k = e^{a(T - t_k)} W_k - dt sum_{j=k}^{N-1} e^{a (t_j - t_k)} 0.25.
    for (std::size_t k = 0; k < 16; ++k) {
        double drift = 0.0;
        for (std::size_t j = k; j < 16; ++j) drift += grid.dt() * std::exp(a * (grid.time(j) - grid.time(k))) * 0.25;
        const double decay = std::exp(a * (2.0 - grid.time(k)));
        for (std::size_t m : {0u, 100u, 499u}) {
            CHECK(y.slice(k)(0, m) == doctest::Approx(decay * bm.values(k)[m] - drift).epsilon(1e-9));
            CHECK(z.slice(k)(0, m) == doctest::Approx(decay).epsilon(1e-9));
        }
    }
}

TEST_CASE("Picard iteration with G = {0} stops after two iterations") {
    const auto problem = make_problem(1.0, diag({-1.0}), {TerminalSpec::Kind::linear, vec({1.0})},
                                      constant_point(vec({0.0})));
    const SolveResult r = solve(problem, small_options());
    REQUIRE(r.report.windows.size() == 1);
    CHECK(r.report.windows[0].iterations.size() == 2);
    CHECK(r.report.windows[0].iterations[1].dy == 0.0);
    CHECK(r.report.converged());
}

TEST_CASE("constant singleton driver reduces to a linear equation") {
    const auto problem = make_problem(1.0, diag({0.0}), {TerminalSpec::Kind::constant, vec({1.0})},
                                      constant_point(vec({0.5})));
    const SolveResult r = solve(problem, small_options());
    const TimeGrid& grid = r.solution.y.grid();
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        CHECK(r.solution.y.slice(k).mean() == doctest::Approx(1.0 - 0.5 * (1.0 - grid.time(k))).epsilon(1e-12));
        CHECK(r.solution.g.slice(k).mean() == doctest::Approx(0.5).epsilon(1e-15));
    }
    CHECK(r.report.residuals->inclusion_max <= 1e-15);
    CHECK(r.report.residuals->equation_max <= 1e-12);
}

TEST_CASE("single-window solve equals a direct interval solve bitwise") {
    // Lipschitz constant 0 yields one window covering [0, T].
    const SetValuedSpec g({vec({0.1, 0.0})}, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), BallShape{0.3},
                          0.0);
    const auto problem = make_problem(0.5, diag({-1.0, -0.5}), {TerminalSpec::Kind::linear, vec({1.0, 1.0})}, g);
    const SolverOptions opts = small_options();
    const SolveResult r = solve(problem, opts);
    REQUIRE(r.report.schedule.windows == 1);

    const SolveContext& ctx = *r.context;
    Solution direct{ProcessEnsemble(ctx.grid, opts.paths, 2), ProcessEnsemble(ctx.grid, opts.paths, 2),
                    ProcessEnsemble(ctx.grid, opts.paths, 2), {0, ctx.grid.steps()}};
    picard_solve_interval(problem, 0, 0, ctx.grid.steps(), ctx.xi, ctx, direct);
    for (std::size_t k = 0; k < ctx.grid.steps(); ++k) {
        CHECK(direct.y.slice(k) == r.solution.y.slice(k));
        CHECK(direct.z.slice(k) == r.solution.z.slice(k));
        CHECK(direct.g.slice(k) == r.solution.g.slice(k));
    }
}

TEST_CASE("ball of radius zero reproduces the singleton solve") {
    const Eigen::MatrixXd ay = diag({-0.3, -0.3});
    const SetValuedSpec ball({vec({0.0, 0.0})}, ay, Eigen::MatrixXd::Zero(2, 2), BallShape{0.0}, 0.3);
    const SetValuedSpec point({vec({0.0, 0.0})}, ay, Eigen::MatrixXd::Zero(2, 2), SingletonShape{}, 0.3);
    const TerminalSpec xi{TerminalSpec::Kind::linear, vec({1.0, 1.0})};
    SolverOptions opts = small_options();
    opts.paths = 1000;
    const SolveResult a = solve(make_problem(1.0, diag({-1.0, -0.5}), xi, ball), opts);
    const SolveResult b = solve(make_problem(1.0, diag({-1.0, -0.5}), xi, point), opts);
    double gap = 0.0;
    for (std::size_t k = 0; k < a.solution.y.grid().nodes(); ++k) {
        gap = std::max(gap, (a.solution.y.slice(k) - b.solution.y.slice(k)).cwiseAbs().maxCoeff());
        gap = std::max(gap, (a.solution.z.slice(k) - b.solution.z.slice(k)).cwiseAbs().maxCoeff());
    }
    CHECK(gap <= 1e-12);
}

TEST_CASE("verification detects a corrupted Z") {
    const SetValuedSpec ball({vec({0.0})}, diag({-0.3}), Eigen::MatrixXd::Zero(1, 1), BallShape{0.2}, 0.3);
    const auto problem = make_problem(1.0, diag({-1.0}), {TerminalSpec::Kind::linear, vec({1.0})}, ball);
    SolverOptions opts = small_options();
    opts.paths = 4000;
    const SolveResult r = solve(problem, opts);
    const ResidualReport& good = *r.report.residuals;
    CHECK(good.inclusion_max <= 1e-12);
    CHECK(good.equation_max <= 0.05);

    Solution bad = r.solution;
    for (std::size_t k = 0; k < bad.z.grid().nodes(); ++k) bad.z.slice(k) *= 2.0;
    const ResidualReport worse = verify_solution(bad, problem, *r.context);
    CHECK(worse.equation_max > 5.0 * good.equation_max);
    CHECK(worse.equation_max > 0.1);
    CHECK(worse.z_crosscheck > 10.0 * good.z_crosscheck);
}

TEST_CASE("non-convergence carries the partial report") {
    const SetValuedSpec ball({vec({0.0})}, diag({-0.3}), diag({0.2}), BallShape{0.2}, 0.5);
    const auto problem = make_problem(1.0, diag({-1.0}), {TerminalSpec::Kind::linear, vec({1.0})}, ball);
    SolverOptions opts = small_options();
    opts.n_max = 1;
    opts.tol = 1e-12;
    try {
        solve(problem, opts);
        FAIL("expected non-convergence");
    } catch (const NonConvergenceError& e) {
        REQUIRE(e.partial().windows.size() == 1);
        CHECK_FALSE(e.partial().windows[0].converged);
        CHECK(e.partial().windows[0].iterations.size() == 1);
        CHECK_FALSE(e.partial().converged());
        CHECK_FALSE(e.partial().residuals.has_value());
    }
}

TEST_CASE("fitted contraction ratio") {
    WindowReport w;
    for (std::size_t it = 1; it <= 10; ++it) {
        IterationRecord r;
        r.iteration = it;
        r.dy = 2.0 * std::pow(0.3, static_cast<double>(it));
        r.dz = std::pow(0.3, static_cast<double>(it));
        w.iterations.push_back(r);
    }
    CHECK(w.fitted_ratio() == doctest::Approx(0.3).epsilon(1e-12));
    w.iterations.resize(2);
    CHECK(std::isnan(w.fitted_ratio()));
}

TEST_CASE("terminal value is the sampled terminal condition bitwise") {
    const SetValuedSpec ball({vec({0.0})}, diag({-0.3}), Eigen::MatrixXd::Zero(1, 1), BallShape{0.2}, 0.3);
    const auto problem = make_problem(1.0, diag({-1.0}), {TerminalSpec::Kind::quadratic, vec({0.5})}, ball);
    const SolveResult r = solve(problem, small_options());
    const std::size_t n = r.context->grid.steps();
    CHECK(r.solution.y.slice(n) == r.context->xi);
    for (std::size_t m = 0; m < 10; ++m) {
        const double w = r.context->bm.values(n)[m];
        CHECK(r.solution.y.slice(n)(0, m) == 0.5 * (w * w));
    }
}

TEST_CASE("constant singleton solve agrees with the linear pipeline") {
    const StateVector c = vec({0.5, -0.25});
    const auto problem =
        make_problem(1.0, diag({-1.0, 0.3}), {TerminalSpec::Kind::linear, vec({1.0, 2.0})}, constant_point(c));
    const SolverOptions opts = small_options();
    const SolveResult r = solve(problem, opts);
    const SolveContext& ctx = *r.context;
    ProcessEnsemble g(ctx.grid, opts.paths, 2);
    for (std::size_t k = 0; k < ctx.grid.nodes(); ++k) g.slice(k) = c.replicate(1, static_cast<Eigen::Index>(opts.paths));
    const auto [y, z] = solve_linear_bsee(g, ctx.xi, ctx.cache, ctx.bm, opts.basis_degree);
    double gap = 0.0;
    for (std::size_t k = 0; k < ctx.grid.nodes(); ++k) {
        gap = std::max(gap, (y.slice(k) - r.solution.y.slice(k)).cwiseAbs().maxCoeff());
        gap = std::max(gap, (z.slice(k) - r.solution.z.slice(k)).cwiseAbs().maxCoeff());
    }
    CHECK(gap <= 1e-12);
}

TEST_CASE("Z cross-check for a pure martingale terminal value") {
    const auto problem = make_problem(1.0, diag({0.0, 0.0}), {TerminalSpec::Kind::linear, vec({1.0, -1.0})},
                                      constant_point(vec({0.0, 0.0})));
    const SolveResult r = solve(problem, small_options());
    CHECK(r.report.residuals->z_norm == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(r.report.residuals->z_crosscheck <= 1e-9);
}

TEST_CASE("difference norms do not increase from the second iteration on") {
    const SetValuedSpec ball({vec({0.0, 0.1})}, diag({-0.3, -0.3}), diag({0.1, 0.1}), BallShape{0.2}, 0.4);
    const auto problem = make_problem(1.0, diag({-1.0, -0.5}), {TerminalSpec::Kind::linear, vec({1.0, 1.0})}, ball);
    SolverOptions opts = small_options();
    opts.tol = 1e-9;
    const SolveResult r = solve(problem, opts);
    for (const auto& w : r.report.windows) {
        for (std::size_t i = 2; i < w.iterations.size(); ++i) {
            const auto& prev = w.iterations[i - 1];
            const auto& cur = w.iterations[i];
            CHECK(cur.dy + cur.dz <= prev.dy + prev.dz);
        }
        CHECK(w.fitted_ratio() <= 0.6);
    }
}
