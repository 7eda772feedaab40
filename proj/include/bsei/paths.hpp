#pragma once

#include "bsei/geometry.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bsei {

/// Uniform grid t_k = k T / N on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t nodes() const { return steps_ + 1; }
    double dt() const { return dt_; }
    double time(std::size_t k) const;

    bool operator==(const TimeGrid& other) const = default;

private:
    double horizon_;
    std::size_t steps_;
    double dt_;
};

/// Seeded scalar Brownian increments dW[k][m] ~ N(0, dt), plus the running
/// values W[k][m]. Draws come from Philox4x32-10 keyed by the seed with
/// counter (path, step), so they do not depend on the ensemble shape.
class BrownianEnsemble {
public:
    BrownianEnsemble(TimeGrid grid, std::size_t paths, std::uint64_t seed);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return paths_; }
    std::uint64_t seed() const { return seed_; }

    /// Increments dW_k = W_{k+1} - W_k for k < N.
    std::span<const double> increments(std::size_t k) const;
    /// Values W_{t_k} for k <= N (W_0 = 0).
    std::span<const double> values(std::size_t k) const;

    /// Copy in which every increment with index >= first is redrawn from
    /// `seed`; increments before `first` are kept bitwise.
    BrownianEnsemble resampled_from(std::size_t first, std::uint64_t seed) const;

private:
    BrownianEnsemble(TimeGrid grid, std::size_t paths, std::uint64_t seed, bool);
    void draw(std::size_t first_step, std::uint64_t seed);
    void accumulate();

    TimeGrid grid_;
    std::size_t paths_;
    std::uint64_t seed_;
    std::vector<double> increments_;  // N x M
    std::vector<double> values_;      // (N+1) x M
};

BrownianEnsemble simulate_brownian(const TimeGrid& grid, std::size_t paths, std::uint64_t seed);

/// Monte Carlo sample X[k][m] in R^d of a process on a time grid.
///
/// `lookahead` declares how many increments past the left endpoint each
/// X[k] may depend on: 0 means X[k] is F_{t_k}-measurable, the convention
/// required of stochastic integrands.
class ProcessEnsemble {
public:
    ProcessEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, int lookahead = 0);

    const TimeGrid& grid() const { return grid_; }
    std::size_t paths() const { return paths_; }
    std::size_t dim() const { return dim_; }
    int lookahead() const { return lookahead_; }

    /// d x M view of time slice k, one column per path.
    Eigen::Map<Eigen::MatrixXd> slice(std::size_t k);
    Eigen::Map<const Eigen::MatrixXd> slice(std::size_t k) const;

    const std::vector<double>& raw() const { return data_; }
    bool all_finite() const;

private:
    TimeGrid grid_;
    std::size_t paths_;
    std::size_t dim_;
    int lookahead_;
    std::vector<double> data_;
};

/// Per-path sum_{k < upto} X[k] dW_k (d x M). Throws ContractError unless
/// X is declared adapted with the left-endpoint convention.
Eigen::MatrixXd ito_integral(const ProcessEnsemble& x, const BrownianEnsemble& bm, std::size_t upto);

/// ( (1/M) sum_m ( sum_{k=first}^{last-1} dt |X[k][m]|^2 )^{p/2} )^{1/p}
double lp_l2_norm(const ProcessEnsemble& x, double p);
double lp_l2_norm(const ProcessEnsemble& x, double p, std::size_t first, std::size_t last);

/// lp_l2_norm of a - b over [first, last) without materializing the difference.
double lp_l2_distance(const ProcessEnsemble& a, const ProcessEnsemble& b, double p, std::size_t first,
                      std::size_t last);

/// ( (1/M) sum_m |v_m|^p )^{1/p} for a d x M sample.
double sample_lp_norm(const Eigen::MatrixXd& v, double p);

/// Kernel tau[u][s][m] of a martingale representation, stored for
/// first <= s < u <= last only. Entries on or above the diagonal do not exist.
class KernelEnsemble {
public:
    KernelEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, std::size_t first, std::size_t last);

    std::size_t first() const { return first_; }
    std::size_t last() const { return last_; }
    std::size_t paths() const { return paths_; }
    std::size_t dim() const { return dim_; }
    const TimeGrid& grid() const { return grid_; }

    /// Throws ContractError when s >= u or the pair lies outside the window.
    Eigen::Map<Eigen::MatrixXd> at(std::size_t u, std::size_t s);
    Eigen::Map<const Eigen::MatrixXd> at(std::size_t u, std::size_t s) const;

    /// Number of stored (u, s) pairs.
    std::size_t stored_pairs() const;

private:
    std::size_t offset(std::size_t u, std::size_t s) const;

    TimeGrid grid_;
    std::size_t paths_;
    std::size_t dim_;
    std::size_t first_;
    std::size_t last_;
    std::vector<double> data_;
};

}  // namespace bsei
