#include "bsei/paths.hpp"

#include "bsei/error.hpp"
#include "bsei/parallel.hpp"
#include "bsei/random.hpp"

#include <cmath>
#include <string>

namespace bsei {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps), dt_(0.0) {
    if (!std::isfinite(horizon_) || horizon_ <= 0.0) throw InputError("time grid: horizon must be positive");
    if (steps_ < 1) throw InputError("time grid: need at least one step");
    dt_ = horizon_ / static_cast<double>(steps_);
}

double TimeGrid::time(std::size_t k) const {
    if (k > steps_) throw InputError("time grid: node index out of range");
    if (k == steps_) return horizon_;
    return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
}

BrownianEnsemble::BrownianEnsemble(TimeGrid grid, std::size_t paths, std::uint64_t seed, bool)
    : grid_(grid), paths_(paths), seed_(seed) {
    if (paths_ < 1) throw InputError("brownian ensemble: path count must be >= 1");
    if (paths_ > 0xffffffffULL) throw InputError("brownian ensemble: too many paths");
    increments_.resize(grid_.steps() * paths_);
    values_.resize(grid_.nodes() * paths_);
}

BrownianEnsemble::BrownianEnsemble(TimeGrid grid, std::size_t paths, std::uint64_t seed)
    : BrownianEnsemble(grid, paths, seed, true) {
    draw(0, seed_);
    accumulate();
}

void BrownianEnsemble::draw(std::size_t first_step, std::uint64_t seed) {
    const Philox4x32 rng(seed);
    const double sd = std::sqrt(grid_.dt());
    const std::size_t m_paths = paths_;
    for (std::size_t k = first_step; k < grid_.steps(); ++k) {
        double* row = increments_.data() + k * m_paths;
        parallel_for(m_paths, [&](std::size_t m) {
            row[m] = sd * rng.normal(static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(k), 0u);
        });
    }
}

void BrownianEnsemble::accumulate() {
    std::fill(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(paths_), 0.0);
    for (std::size_t k = 0; k < grid_.steps(); ++k) {
        const double* w = values_.data() + k * paths_;
        const double* dw = increments_.data() + k * paths_;
        double* next = values_.data() + (k + 1) * paths_;
        for (std::size_t m = 0; m < paths_; ++m) next[m] = w[m] + dw[m];
    }
}

std::span<const double> BrownianEnsemble::increments(std::size_t k) const {
    if (k >= grid_.steps()) throw InputError("brownian ensemble: increment index out of range");
    return {increments_.data() + k * paths_, paths_};
}

std::span<const double> BrownianEnsemble::values(std::size_t k) const {
    if (k > grid_.steps()) throw InputError("brownian ensemble: node index out of range");
    return {values_.data() + k * paths_, paths_};
}

BrownianEnsemble BrownianEnsemble::resampled_from(std::size_t first, std::uint64_t seed) const {
    BrownianEnsemble copy = *this;
    copy.draw(first, seed);
    copy.accumulate();
    return copy;
}

BrownianEnsemble simulate_brownian(const TimeGrid& grid, std::size_t paths, std::uint64_t seed) {
    return BrownianEnsemble(grid, paths, seed);
}

ProcessEnsemble::ProcessEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, int lookahead)
    : grid_(grid), paths_(paths), dim_(dim), lookahead_(lookahead) {
    if (paths_ < 1 || dim_ < 1) throw InputError("process ensemble: paths and dim must be >= 1");
    if (lookahead_ < 0) throw InputError("process ensemble: lookahead must be >= 0");
    data_.assign(grid_.nodes() * paths_ * dim_, 0.0);
}

Eigen::Map<Eigen::MatrixXd> ProcessEnsemble::slice(std::size_t k) {
    if (k >= grid_.nodes()) throw InputError("process ensemble: node index out of range");
    return {data_.data() + k * paths_ * dim_, static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(paths_)};
}

Eigen::Map<const Eigen::MatrixXd> ProcessEnsemble::slice(std::size_t k) const {
    if (k >= grid_.nodes()) throw InputError("process ensemble: node index out of range");
    return {data_.data() + k * paths_ * dim_, static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(paths_)};
}

bool ProcessEnsemble::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Eigen::MatrixXd ito_integral(const ProcessEnsemble& x, const BrownianEnsemble& bm, std::size_t upto) {
    if (x.lookahead() != 0) {
        throw ContractError("ito_integral: integrand declares lookahead " + std::to_string(x.lookahead()) +
                            "; the left-endpoint convention requires 0");
    }
    if (!(x.grid() == bm.grid()) || x.paths() != bm.paths()) {
        throw InputError("ito_integral: integrand and Brownian ensemble live on different grids");
    }
    if (upto > x.grid().steps()) throw InputError("ito_integral: upper node beyond the grid");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.dim()),
                                                static_cast<Eigen::Index>(x.paths()));
    for (std::size_t k = 0; k < upto; ++k) {
        const auto dw = bm.increments(k);
        const Eigen::Map<const Eigen::RowVectorXd> dw_row(dw.data(), static_cast<Eigen::Index>(dw.size()));
        acc += x.slice(k) * dw_row.asDiagonal();
    }
    return acc;
}

namespace {

void require_p(double p) {
    if (!std::isfinite(p) || p <= 1.0) throw InputError("norm exponent p must be finite and > 1");
}

double lp_of_quadratic(const Eigen::VectorXd& quad, double p) {
    // quad[m] = sum_k dt |X|^2 on path m
    double acc = 0.0;
    for (Eigen::Index m = 0; m < quad.size(); ++m) acc += std::pow(quad[m], 0.5 * p);
    return std::pow(acc / static_cast<double>(quad.size()), 1.0 / p);
}

}  // namespace

double lp_l2_norm(const ProcessEnsemble& x, double p) { return lp_l2_norm(x, p, 0, x.grid().steps()); }

double lp_l2_norm(const ProcessEnsemble& x, double p, std::size_t first, std::size_t last) {
    require_p(p);
    if (first > last || last > x.grid().steps()) throw InputError("lp_l2_norm: bad window");
    Eigen::VectorXd quad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.paths()));
    for (std::size_t k = first; k < last; ++k) quad += x.grid().dt() * x.slice(k).colwise().squaredNorm().transpose();
    return lp_of_quadratic(quad, p);
}

double lp_l2_distance(const ProcessEnsemble& a, const ProcessEnsemble& b, double p, std::size_t first,
                      std::size_t last) {
    require_p(p);
    if (!(a.grid() == b.grid()) || a.paths() != b.paths() || a.dim() != b.dim()) {
        throw InputError("lp_l2_distance: ensembles have different shapes");
    }
    if (first > last || last > a.grid().steps()) throw InputError("lp_l2_distance: bad window");
    Eigen::VectorXd quad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a.paths()));
    for (std::size_t k = first; k < last; ++k) {
        quad += a.grid().dt() * (a.slice(k) - b.slice(k)).colwise().squaredNorm().transpose();
    }
    return lp_of_quadratic(quad, p);
}

double sample_lp_norm(const Eigen::MatrixXd& v, double p) {
    if (!std::isfinite(p) || p < 1.0) throw InputError("sample_lp_norm: p must be >= 1");
    if (v.cols() == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index m = 0; m < v.cols(); ++m) acc += std::pow(v.col(m).norm(), p);
    return std::pow(acc / static_cast<double>(v.cols()), 1.0 / p);
}

KernelEnsemble::KernelEnsemble(TimeGrid grid, std::size_t paths, std::size_t dim, std::size_t first,
                               std::size_t last)
    : grid_(grid), paths_(paths), dim_(dim), first_(first), last_(last) {
    if (first_ >= last_ || last_ > grid_.steps()) throw InputError("kernel ensemble: need first < last <= N");
    const std::size_t n = last_ - first_ + 1;
    data_.assign(n * (n - 1) / 2 * paths_ * dim_, 0.0);
}

std::size_t KernelEnsemble::stored_pairs() const {
    const std::size_t n = last_ - first_ + 1;
    return n * (n - 1) / 2;
}

std::size_t KernelEnsemble::offset(std::size_t u, std::size_t s) const {
    if (s >= u) throw ContractError("kernel ensemble: entries with s >= u do not exist");
    if (s < first_ || u > last_) throw ContractError("kernel ensemble: index outside the stored window");
    const std::size_t uu = u - first_;
    const std::size_t ss = s - first_;
    return (uu * (uu - 1) / 2 + ss) * paths_ * dim_;
}

Eigen::Map<Eigen::MatrixXd> KernelEnsemble::at(std::size_t u, std::size_t s) {
    return {data_.data() + offset(u, s), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(paths_)};
}

Eigen::Map<const Eigen::MatrixXd> KernelEnsemble::at(std::size_t u, std::size_t s) const {
    return {data_.data() + offset(u, s), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(paths_)};
}

}  // namespace bsei
