#include "bsei/solver.hpp"

#include "bsei/parallel.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace bsei {

Eigen::MatrixXd TerminalSpec::sample(const BrownianEnsemble& bm) const {
    const auto w = bm.values(bm.grid().steps());
    Eigen::MatrixXd xi(c.size(), static_cast<Eigen::Index>(bm.paths()));
    for (std::size_t m = 0; m < bm.paths(); ++m) {
        double f = 1.0;
        if (kind == Kind::linear) f = w[m];
        if (kind == Kind::quadratic) f = w[m] * w[m];
        xi.col(static_cast<Eigen::Index>(m)) = f * c;
    }
    return xi;
}

BSEIProblem::BSEIProblem(double horizon_, double p_, Generator generator_, TerminalSpec terminal_,
                         SetValuedSpec gspec_)
    : horizon(horizon_), p(p_), generator(std::move(generator_)), terminal(std::move(terminal_)),
      gspec(std::move(gspec_)) {
    if (!std::isfinite(horizon) || horizon <= 0.0) throw InputError("problem: T must be positive");
    if (!std::isfinite(p) || p <= 1.0) throw InputError("problem: p must be > 1");
    if (terminal.c.size() != static_cast<Eigen::Index>(generator.dim()) || !terminal.c.allFinite()) {
        throw InputError("problem: terminal vector must be finite with the state dimension");
    }
    if (gspec.dim() != generator.dim()) throw InputError("problem: generator G and matrix A differ in dimension");
}

double PicardSchedule::margin() const { return beta * std::sqrt(delta); }

double PicardSchedule::eps(std::size_t n) const { return std::pow(0.5 * margin(), static_cast<double>(n)); }

PicardSchedule compute_schedule(double horizon, double lipschitz, double gamma_s, double c_pe, std::size_t n_max,
                                double tol) {
    if (!std::isfinite(horizon) || horizon <= 0.0) throw InputError("schedule: T must be positive");
    if (!std::isfinite(c_pe) || c_pe <= 0.0) throw InputError("schedule: c_pE must be positive");
    if (!std::isfinite(lipschitz) || lipschitz < 0.0) throw InputError("schedule: Lipschitz constant must be >= 0");
    if (!std::isfinite(gamma_s) || gamma_s < 1.0) throw InputError("schedule: gamma(S) must be >= 1");
    if (n_max < 1) throw InputError("schedule: n_max must be >= 1");
    if (!std::isfinite(tol) || tol <= 0.0) throw InputError("schedule: tol must be positive");

    PicardSchedule s;
    s.gamma_s = gamma_s;
    s.c_pe = c_pe;
    s.lipschitz = lipschitz;
    s.n_max = n_max;
    s.tol = tol;
    s.beta = c_pe * lipschitz * gamma_s * (1.0 + std::sqrt(horizon) * (1.0 + gamma_s));
    if (!std::isfinite(s.beta)) throw InputError("schedule: beta overflows");

    if (s.beta == 0.0) {
        s.delta = 0.25 * horizon;
        s.windows = 1;
        s.window_length = horizon;
        return s;
    }
    s.delta = 0.25 * std::min(1.0 / (s.beta * s.beta), horizon);
    while (s.margin() > 0.5) s.delta = std::nextafter(s.delta, 0.0);
    if (!(s.delta > 0.0)) throw InputError("schedule: window length underflows");

    const double ratio = horizon / s.delta;
    if (ratio > 1e7) throw InputError("schedule: more than 1e7 windows required");
    auto windows = static_cast<std::size_t>(std::ceil(ratio));
    if (windows > 1 && static_cast<double>(windows - 1) >= ratio * (1.0 - 1e-12)) --windows;
    s.windows = std::max<std::size_t>(windows, 1);
    s.window_length = horizon / static_cast<double>(s.windows);
    return s;
}

PicardSchedule compute_schedule(const BSEIProblem& problem, const SemigroupCache& cache, double c_pe,
                                std::size_t n_max, double tol) {
    return compute_schedule(problem.horizon, problem.lipschitz(), cache.gamma_bound(), c_pe, n_max, tol);
}

double WindowReport::fitted_ratio() const {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (const auto& it : iterations) {
        const double v = it.dy + it.dz;
        if (it.iteration < 2 || it.iteration > 8 || !(v > 0.0)) continue;
        const double x = static_cast<double>(it.iteration);
        const double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return std::exp(slope);
}

bool SolveReport::converged() const {
    if (windows.size() != schedule.windows) return false;
    for (const auto& w : windows) {
        if (!w.converged) return false;
    }
    return true;
}

SolveContext::SolveContext(const BSEIProblem& problem, const PicardSchedule& schedule_,
                           const SolverOptions& options_)
    : schedule(schedule_), options(options_),
      grid(problem.horizon, schedule_.windows * std::max<std::size_t>(options_.steps_per_window, 1)),
      bm(simulate_brownian(grid, options_.paths, options_.seed)),
      cache(problem.generator, grid.dt(), grid.steps()), regs(bm, options_.basis_degree),
      xi(problem.terminal.sample(bm)) {
    if (options.steps_per_window < 1) throw InputError("solver: steps_per_window must be >= 1");
}

void select_generator(const SetValuedSpec& gspec, const ProcessEnsemble& g_prev, const ProcessEnsemble& y_prev,
                      const ProcessEnsemble& z_prev, ProcessEnsemble& g_new, std::size_t first, std::size_t last) {
    if (g_prev.lookahead() != 0) throw ContractError("select_generator: g must be adapted");
    for (std::size_t k = first; k < last; ++k) {
        gspec.select_slice(k, y_prev.slice(k), z_prev.slice(k), g_prev.slice(k), g_new.slice(k));
    }
}

ProcessEnsemble select_generator(const ProcessEnsemble& g_prev, const ProcessEnsemble& y_prev,
                                 const ProcessEnsemble& z_prev, const SetValuedSpec& gspec) {
    if (!(g_prev.grid() == y_prev.grid()) || !(g_prev.grid() == z_prev.grid()) || g_prev.paths() != y_prev.paths() ||
        g_prev.paths() != z_prev.paths()) {
        throw InputError("select_generator: ensembles differ in shape");
    }
    ProcessEnsemble out(g_prev.grid(), g_prev.paths(), g_prev.dim());
    select_generator(gspec, g_prev, y_prev, z_prev, out, 0, g_prev.grid().nodes());
    return out;
}

void solve_linear_bsee(const ProcessEnsemble& g, const Eigen::MatrixXd& terminal, const SemigroupCache& cache,
                       const BrownianEnsemble& bm, const RegressionCache& regs, std::size_t first, std::size_t last,
                       ProcessEnsemble& y, ProcessEnsemble& z) {
    if (g.lookahead() != 0) throw ContractError("solve_linear_bsee: g must be adapted");
    if (first >= last || last > regs.steps()) throw InputError("solve_linear_bsee: bad window");
    if (terminal.rows() != static_cast<Eigen::Index>(y.dim()) ||
        terminal.cols() != static_cast<Eigen::Index>(y.paths())) {
        throw InputError("solve_linear_bsee: terminal values have the wrong shape");
    }
    const double dt = bm.grid().dt();
    const Eigen::MatrixXd& step = cache.at_index(1);
    y.slice(last) = terminal;
    Eigen::MatrixXd target;
    for (std::size_t k = last; k-- > first;) {
        target.noalias() = step * y.slice(k + 1);
        Regressor::Fit fit = [&] {
            try {
                return regs.at(k).fit(target);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (time index " + std::to_string(k) + ")");
            }
        }();
        y.slice(k) = fit.mean - dt * g.slice(k);
        z.slice(k) = fit.slope;
    }
}

std::pair<ProcessEnsemble, ProcessEnsemble> solve_linear_bsee(const ProcessEnsemble& g,
                                                              const Eigen::MatrixXd& terminal,
                                                              const SemigroupCache& cache,
                                                              const BrownianEnsemble& bm, std::size_t basis_degree) {
    if (!(g.grid() == bm.grid()) || g.paths() != bm.paths()) {
        throw InputError("solve_linear_bsee: g and the Brownian ensemble differ in shape");
    }
    const RegressionCache regs(bm, basis_degree);
    ProcessEnsemble y(g.grid(), g.paths(), g.dim());
    ProcessEnsemble z(g.grid(), g.paths(), g.dim());
    const std::size_t n = g.grid().steps();
    solve_linear_bsee(g, terminal, cache, bm, regs, 0, n, y, z);
    z.slice(n) = z.slice(n - 1);
    return {std::move(y), std::move(z)};
}

namespace {

double window_distance(const ProcessEnsemble& cur, const std::vector<Eigen::MatrixXd>& prev, std::size_t first,
                       double p) {
    Eigen::VectorXd quad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cur.paths()));
    for (std::size_t i = 0; i < prev.size(); ++i) {
        quad += cur.grid().dt() * (cur.slice(first + i) - prev[i]).colwise().squaredNorm().transpose();
    }
    double acc = 0.0;
    for (Eigen::Index m = 0; m < quad.size(); ++m) acc += std::pow(quad[m], 0.5 * p);
    return std::pow(acc / static_cast<double>(quad.size()), 1.0 / p);
}

}  // namespace

WindowReport picard_solve_interval(const BSEIProblem& problem, std::size_t window_index, std::size_t first,
                                   std::size_t last, const Eigen::MatrixXd& terminal, const SolveContext& ctx,
                                   Solution& sol) {
    if (first >= last || last > ctx.grid.steps()) throw InputError("picard_solve_interval: bad window");
    const double length = ctx.grid.time(last) - ctx.grid.time(first);
    if (length > ctx.schedule.delta * (1.0 + 1e-9) && ctx.schedule.beta > 0.0) {
        throw ContractError("picard_solve_interval: window longer than delta");
    }
    const std::size_t n = last - first;
    const SetValuedSpec& gspec = problem.gspec;

    WindowReport report;
    report.index = window_index;
    report.first = first;
    report.last = last;

    for (std::size_t k = first; k < last; ++k) {
        sol.y.slice(k).setZero();
        sol.z.slice(k).setZero();
        sol.g.slice(k).setZero();
    }
    std::vector<Eigen::MatrixXd> yp(n), zp(n), gp(n);
    double previous = 0.0;
    for (std::size_t it = 1; it <= ctx.schedule.n_max; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            yp[i] = sol.y.slice(first + i);
            zp[i] = sol.z.slice(first + i);
            gp[i] = sol.g.slice(first + i);
        }
        for (std::size_t i = 0; i < n; ++i) gspec.select_slice(first + i, yp[i], zp[i], gp[i], sol.g.slice(first + i));
        solve_linear_bsee(sol.g, terminal, ctx.cache, ctx.bm, ctx.regs, first, last, sol.y, sol.z);

        IterationRecord rec;
        rec.window = window_index;
        rec.iteration = it;
        rec.dy = window_distance(sol.y, yp, first, problem.p);
        rec.dz = window_distance(sol.z, zp, first, problem.p);
        rec.dg = window_distance(sol.g, gp, first, problem.p);
        rec.eps = ctx.schedule.eps(it);
        const double total = rec.dy + rec.dz;
        if (it >= 2) rec.ratio = previous > 0.0 ? total / previous : std::numeric_limits<double>::quiet_NaN();
        previous = total;
        report.iterations.push_back(rec);
        if (!std::isfinite(total)) break;
        if (total <= ctx.schedule.tol) {
            report.converged = true;
            break;
        }
    }

    for (std::size_t k = first; k < last; ++k) {
        gspec.select_slice(k, sol.y.slice(k), sol.z.slice(k), sol.g.slice(k), sol.g.slice(k));
    }

    if (!report.converged) {
        SolveReport partial;
        partial.schedule = ctx.schedule;
        partial.steps = ctx.grid.steps();
        partial.paths = ctx.bm.paths();
        partial.seed = ctx.bm.seed();
        partial.windows.push_back(report);
        throw NonConvergenceError("window " + std::to_string(window_index) + " did not reach tol " +
                                      std::to_string(ctx.schedule.tol) + " within " +
                                      std::to_string(ctx.schedule.n_max) + " Picard iterations",
                                  std::move(partial));
    }
    return report;
}

SolveResult solve(const BSEIProblem& problem, const SolverOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    constexpr std::size_t kGammaProbeSteps = 1024;
    const SemigroupCache probe(problem.generator, problem.horizon / kGammaProbeSteps, kGammaProbeSteps);
    const PicardSchedule schedule = compute_schedule(problem, probe, options.c_pe, options.n_max, options.tol);
    auto ctx = std::make_shared<const SolveContext>(problem, schedule, options);

    const std::size_t n = ctx->grid.steps();
    const std::size_t nw = options.steps_per_window;
    Solution sol{ProcessEnsemble(ctx->grid, options.paths, problem.dim()),
                 ProcessEnsemble(ctx->grid, options.paths, problem.dim()),
                 ProcessEnsemble(ctx->grid, options.paths, problem.dim()),
                 {}};
    for (std::size_t w = 0; w <= schedule.windows; ++w) sol.window_nodes.push_back(w * nw);

    SolveReport report;
    report.schedule = schedule;
    report.steps = n;
    report.paths = options.paths;
    report.seed = options.seed;
    report.ridge_steps = ctx->regs.ridge_steps();

    sol.y.slice(n) = ctx->xi;
    for (std::size_t w = schedule.windows; w-- > 0;) {
        const std::size_t first = sol.window_nodes[w];
        const std::size_t last = sol.window_nodes[w + 1];
        const Eigen::MatrixXd terminal = sol.y.slice(last);
        try {
            report.windows.push_back(picard_solve_interval(problem, w, first, last, terminal, *ctx, sol));
        } catch (const NonConvergenceError& e) {
            SolveReport partial = report;
            partial.windows.push_back(e.partial().windows.back());
            partial.runtime_seconds = elapsed();
            throw NonConvergenceError(e.what(), std::move(partial));
        }
    }
    sol.z.slice(n) = sol.z.slice(n - 1);
    problem.gspec.select_slice(n, sol.y.slice(n), sol.z.slice(n), sol.g.slice(n - 1), sol.g.slice(n));

    report.residuals = verify_solution(sol, problem, *ctx);
    report.runtime_seconds = elapsed();
    return SolveResult{std::move(sol), std::move(report), std::move(ctx)};
}

ResidualReport verify_solution(const Solution& sol, const BSEIProblem& problem, const SolveContext& ctx) {
    const std::size_t n = ctx.grid.steps();
    const auto paths = static_cast<Eigen::Index>(ctx.bm.paths());
    const auto d = static_cast<Eigen::Index>(problem.dim());
    const double dt = ctx.grid.dt();
    if (!(sol.y.grid() == ctx.grid) || sol.y.paths() != ctx.bm.paths()) {
        throw InputError("verify_solution: solution and context differ in shape");
    }
    ResidualReport out;

    Eigen::MatrixXd projected(d, paths);
    for (std::size_t k = 0; k <= n; ++k) {
        problem.gspec.select_slice(k, sol.y.slice(k), sol.z.slice(k), sol.g.slice(k), projected);
        out.inclusion_max = std::max(out.inclusion_max, (sol.g.slice(k) - projected).colwise().norm().maxCoeff());
    }

    out.equation.assign(n + 1, 0.0);
    out.equation_l2.assign(n + 1, 0.0);
    out.equation_l2_se.assign(n + 1, 0.0);
    const Eigen::MatrixXd& step = ctx.cache.at_index(1);
    Eigen::MatrixXd tail = -ctx.xi;
    auto record = [&](std::size_t k, const Eigen::MatrixXd& r) {
        const Eigen::ArrayXd sq = r.colwise().squaredNorm().transpose().array();
        const double l2 = std::sqrt(sq.mean());
        out.equation[k] = sample_lp_norm(r, problem.p);
        out.equation_l2[k] = l2;
        if (l2 > 0.0 && paths > 1) {
            const double var = (sq - sq.mean()).square().sum() / static_cast<double>(paths - 1);
            out.equation_l2_se[k] = std::sqrt(var / static_cast<double>(paths)) / (2.0 * l2);
        }
    };
    record(n, sol.y.slice(n) + tail);
    for (std::size_t k = n; k-- > 0;) {
        const auto dw = ctx.bm.increments(k);
        const Eigen::Map<const Eigen::RowVectorXd> dw_row(dw.data(), paths);
        tail = step * tail + dt * sol.g.slice(k) + sol.z.slice(k) * dw_row.asDiagonal();
        record(k, sol.y.slice(k) + tail);
    }
    for (std::size_t k = 0; k <= n; ++k) {
        out.equation_max = std::max(out.equation_max, out.equation[k]);
        out.equation_l2_max = std::max(out.equation_l2_max, out.equation_l2[k]);
    }

    // Rebuild Z window by window from the representations of the window
    // terminal and of g, then compare with the solver's Z.
    double gap = 0.0, norm = 0.0;
    for (std::size_t w = 0; w + 1 < sol.window_nodes.size(); ++w) {
        const std::size_t lo = sol.window_nodes[w];
        const std::size_t hi = sol.window_nodes[w + 1];
        std::vector<Eigen::MatrixXd> rebuilt(hi - lo, Eigen::MatrixXd::Zero(d, paths));
        represent_target(sol.y.slice(hi), hi, lo, ctx.bm, ctx.regs, [&](std::size_t s, const Eigen::MatrixXd& tau) {
            rebuilt[s - lo].noalias() += ctx.cache.at_index(hi - s) * tau;
        });
        for (std::size_t j = lo + 1; j < hi; ++j) {
            represent_target(sol.g.slice(j), j, lo, ctx.bm, ctx.regs, [&](std::size_t s, const Eigen::MatrixXd& tau) {
                rebuilt[s - lo].noalias() -= dt * ctx.cache.at_index(j - s) * tau;
            });
        }
        for (std::size_t k = lo; k < hi; ++k) {
            gap += dt * (rebuilt[k - lo] - sol.z.slice(k)).squaredNorm();
            norm += dt * sol.z.slice(k).squaredNorm();
        }
    }
    out.z_crosscheck = std::sqrt(gap / static_cast<double>(paths));
    out.z_norm = std::sqrt(norm / static_cast<double>(paths));

    for (std::size_t k = 0; k < n; ++k) {
        out.continuity_modulus = std::max(
            out.continuity_modulus, sample_lp_norm(Eigen::MatrixXd(sol.y.slice(k + 1) - sol.y.slice(k)), problem.p));
    }
    return out;
}

}  // namespace bsei
