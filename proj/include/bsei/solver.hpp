#pragma once

#include "bsei/error.hpp"
#include "bsei/geometry.hpp"
#include "bsei/paths.hpp"
#include "bsei/regression.hpp"
#include "bsei/semigroup.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bsei {

/// Terminal condition xi as a polynomial of W_T: c, c W_T or c W_T^2.
struct TerminalSpec {
    enum class Kind { constant, linear, quadratic };
    Kind kind = Kind::constant;
    StateVector c;

    /// xi per path (d x M).
    Eigen::MatrixXd sample(const BrownianEnsemble& bm) const;
};

/// dY + AY dt in G(t, Y, Z) dt + Z dW on [0, T], Y_T = xi.
struct BSEIProblem {
    BSEIProblem(double horizon, double p, Generator generator, TerminalSpec terminal, SetValuedSpec gspec);

    double horizon;
    double p;
    Generator generator;
    TerminalSpec terminal;
    SetValuedSpec gspec;

    std::size_t dim() const { return generator.dim(); }
    double lipschitz() const { return gspec.lipschitz_k(); }
};

struct PicardSchedule {
    double gamma_s = 1.0;
    double c_pe = 1.0;
    double lipschitz = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    std::size_t windows = 1;
    double window_length = 0.0;
    std::size_t n_max = 25;
    double tol = 1e-3;

    /// (beta sqrt(delta) / 2)^n
    double eps(std::size_t n) const;
    double margin() const;  ///< beta sqrt(delta)
};

/// Schedule from the Lipschitz constant, the semigroup bound and the horizon.
PicardSchedule compute_schedule(double horizon, double lipschitz, double gamma_s, double c_pe, std::size_t n_max,
                                double tol);
PicardSchedule compute_schedule(const BSEIProblem& problem, const SemigroupCache& cache, double c_pe,
                                std::size_t n_max, double tol);

struct SolverOptions {
    std::size_t steps_per_window = 50;
    std::size_t paths = 10'000;
    std::uint64_t seed = 1;
    std::size_t basis_degree = 2;
    double c_pe = 1.0;
    double tol = 1e-3;
    std::size_t n_max = 25;
};

struct IterationRecord {
    std::size_t window = 0;
    std::size_t iteration = 0;
    double dy = 0.0;
    double dz = 0.0;
    double dg = 0.0;
    std::optional<double> ratio;  ///< (dy + dz) over the previous iteration's, from iteration 2
    double eps = 0.0;
};

struct WindowReport {
    std::size_t index = 0;  ///< position in time, 0 = [0, t_1]
    std::size_t first = 0;  ///< first grid node
    std::size_t last = 0;   ///< terminal grid node
    bool converged = false;
    std::vector<IterationRecord> iterations;

    /// exp of the least-squares slope of log(dy + dz) over iterations 2..8;
    /// NaN with fewer than two positive values.
    double fitted_ratio() const;
};

struct ResidualReport {
    double inclusion_max = 0.0;              ///< max_{k,m} dist(g, G(t_k, Y, Z))
    std::vector<double> equation;            ///< per node, sample L^p(Omega)
    std::vector<double> equation_l2;         ///< per node, sample L^2(Omega)
    std::vector<double> equation_l2_se;      ///< standard error of equation_l2
    double equation_max = 0.0;
    double equation_l2_max = 0.0;
    double z_crosscheck = 0.0;               ///< L^2(Omega; L^2(0,T)) gap to the rebuilt Z
    double z_norm = 0.0;                     ///< same norm of Z
    double continuity_modulus = 0.0;         ///< max_k |Y_{k+1} - Y_k|_{L^p(Omega)}
};

struct SolveReport {
    PicardSchedule schedule;
    std::vector<WindowReport> windows;  ///< in solve order, latest window first
    std::optional<ResidualReport> residuals;
    std::size_t steps = 0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> ridge_steps;
    double runtime_seconds = 0.0;

    bool converged() const;
};

/// Window non-convergence; carries everything computed up to the failure.
class NonConvergenceError : public NumericError {
public:
    NonConvergenceError(const std::string& what, SolveReport partial)
        : NumericError(what), partial_(std::move(partial)) {}
    const SolveReport& partial() const { return partial_; }

private:
    SolveReport partial_;
};

struct Solution {
    ProcessEnsemble y;
    ProcessEnsemble z;
    ProcessEnsemble g;
    std::vector<std::size_t> window_nodes;  ///< boundaries 0 = n_0 < ... < n_W = N
};

/// Shared numerical state of one run: grid, Brownian ensemble, semigroup
/// powers and per-step regressors.
struct SolveContext {
    SolveContext(const BSEIProblem& problem, const PicardSchedule& schedule, const SolverOptions& options);

    PicardSchedule schedule;
    SolverOptions options;
    TimeGrid grid;
    BrownianEnsemble bm;
    SemigroupCache cache;
    RegressionCache regs;
    Eigen::MatrixXd xi;
};

/// g_new[k] = project(g_prev[k], G(t_k, Y_prev[k], Z_prev[k])) for first <= k < last.
void select_generator(const SetValuedSpec& gspec, const ProcessEnsemble& g_prev, const ProcessEnsemble& y_prev,
                      const ProcessEnsemble& z_prev, ProcessEnsemble& g_new, std::size_t first, std::size_t last);
ProcessEnsemble select_generator(const ProcessEnsemble& g_prev, const ProcessEnsemble& y_prev,
                                 const ProcessEnsemble& z_prev, const SetValuedSpec& gspec);

/// Backward regression scheme on [first, last] with Y[last] = terminal:
/// Y[k] = E[S(dt) Y[k+1] | F_k] - dt g[k], Z[k] = (1/dt) E[S(dt) Y[k+1] dW_k | F_k].
void solve_linear_bsee(const ProcessEnsemble& g, const Eigen::MatrixXd& terminal, const SemigroupCache& cache,
                       const BrownianEnsemble& bm, const RegressionCache& regs, std::size_t first, std::size_t last,
                       ProcessEnsemble& y, ProcessEnsemble& z);
/// Whole-grid form; Z at the terminal node repeats Z[N-1].
std::pair<ProcessEnsemble, ProcessEnsemble> solve_linear_bsee(const ProcessEnsemble& g,
                                                              const Eigen::MatrixXd& terminal,
                                                              const SemigroupCache& cache,
                                                              const BrownianEnsemble& bm, std::size_t basis_degree);

/// Picard iteration on the window [first, last] from the zero triple, with
/// Y[last] taken from `terminal`. Writes Y, Z, g on first..last-1 (and
/// Y[last]). Throws NonConvergenceError after n_max iterations above tol.
WindowReport picard_solve_interval(const BSEIProblem& problem, std::size_t window_index, std::size_t first,
                                   std::size_t last, const Eigen::MatrixXd& terminal, const SolveContext& ctx,
                                   Solution& sol);

struct SolveResult {
    Solution solution;
    SolveReport report;
    std::shared_ptr<const SolveContext> context;
};

/// Backward window-by-window solve over [0, T] followed by verification.
SolveResult solve(const BSEIProblem& problem, const SolverOptions& options);

ResidualReport verify_solution(const Solution& sol, const BSEIProblem& problem, const SolveContext& ctx);

}  // namespace bsei
