#include "bsei/gamma.hpp"

#include "bsei/error.hpp"
#include "bsei/parallel.hpp"
#include "bsei/random.hpp"

#include <array>
#include <cmath>
#include <string>

namespace bsei {

FiniteRankOperator::FiniteRankOperator(double s, double t, Eigen::VectorXd weights, std::vector<RankOneTerm> terms)
    : s_(s), t_(t), weights_(std::move(weights)), terms_(std::move(terms)) {
    if (!(std::isfinite(s_) && std::isfinite(t_) && s_ >= 0.0 && s_ < t_)) {
        throw InputError("finite-rank operator: need 0 <= s < t");
    }
    if (terms_.empty()) throw InputError("finite-rank operator: at least one term is required");
    if (weights_.size() == 0 || !weights_.allFinite() || (weights_.array() < 0.0).any()) {
        throw InputError("finite-rank operator: quadrature weights must be finite and nonnegative");
    }
    const Eigen::Index d = terms_.front().e.size();
    if (d == 0) throw InputError("finite-rank operator: empty vectors");
    for (const auto& term : terms_) {
        if (term.h.size() != weights_.size()) throw InputError("finite-rank operator: h has the wrong sample count");
        if (term.e.size() != d) throw InputError("finite-rank operator: vectors of different dimension");
        if (!term.h.allFinite() || !term.e.allFinite()) throw InputError("finite-rank operator: non-finite data");
    }
}

Eigen::VectorXd FiniteRankOperator::uniform_nodes(double s, double t, std::size_t n) {
    if (n < 1) throw InputError("finite-rank operator: need at least one node");
    Eigen::VectorXd nodes(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        nodes[static_cast<Eigen::Index>(i)] = s + (t - s) * static_cast<double>(i) / static_cast<double>(n);
    }
    return nodes;
}

FiniteRankOperator FiniteRankOperator::on_uniform_grid(double s, double t, std::size_t n,
                                                       std::vector<RankOneTerm> terms) {
    if (n < 1) throw InputError("finite-rank operator: need at least one node");
    return FiniteRankOperator(s, t, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), (t - s) / static_cast<double>(n)),
                              std::move(terms));
}

FiniteRankOperator indicator_operator(double s, double t, std::size_t n,
                                      const std::vector<std::pair<double, double>>& intervals, const StateVector& e) {
    const Eigen::VectorXd nodes = FiniteRankOperator::uniform_nodes(s, t, n);
    const double h = (t - s) / static_cast<double>(n);
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(nodes.size());
    for (const auto& [a, b] : intervals) {
        if (!(a >= s && a <= b && b <= t)) throw InputError("indicator_operator: interval outside [s, t]");
        for (Eigen::Index i = 0; i < nodes.size(); ++i) {
            // Compare cell midpoints so grid-aligned endpoints are classified exactly.
            const double mid = nodes[i] + 0.5 * h;
            if (mid > a && mid < b) ind[i] = 1.0;
        }
    }
    return FiniteRankOperator::on_uniform_grid(s, t, n, {RankOneTerm{ind, e}});
}

GammaNormResult gamma_norm(const FiniteRankOperator& op, std::size_t n_gauss, std::uint64_t seed) {
    if (n_gauss < 1) throw InputError("gamma_norm: n_gauss must be >= 1");
    const Eigen::VectorXd& w = op.weights();
    auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (w.array() * a.array() * b.array()).sum(); };

    GammaNormResult out;
    std::vector<Eigen::VectorXd> basis;
    const auto d = static_cast<Eigen::Index>(op.dim());
    for (const auto& term : op.terms()) {
        const double original = std::sqrt(inner(term.h, term.h));
        Eigen::VectorXd v = term.h;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const double c = inner(v, basis[i]);
            v -= c * basis[i];
            out.transformed[i] += c * term.e;
        }
        const double rest = std::sqrt(inner(v, v));
        if (!(rest > kDependenceThreshold * original) || original == 0.0) {
            out.dependent_terms = true;
            continue;
        }
        basis.push_back(v / rest);
        out.transformed.push_back(rest * term.e);
    }
    out.rank = basis.size();

    double sq = 0.0;
    for (const auto& e : out.transformed) sq += e.squaredNorm();
    out.exact = std::sqrt(sq);
    if (out.rank == 0) return out;

    Eigen::MatrixXd et(d, static_cast<Eigen::Index>(out.rank));
    for (std::size_t i = 0; i < out.rank; ++i) et.col(static_cast<Eigen::Index>(i)) = out.transformed[i];

    const Philox4x32 rng(seed);
    std::array<double, kReductionBlocks> s1{}, s2{};
    parallel_blocks(n_gauss, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(out.rank));
        for (std::size_t n = begin; n < end; ++n) {
            for (std::size_t j = 0; j < out.rank; ++j) {
                g[static_cast<Eigen::Index>(j)] =
                    rng.normal(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(j), 0u, 0x6a77u);
            }
            const double q = (et * g).squaredNorm();
            s1[b] += q;
            s2[b] += q * q;
        }
    });
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t b = 0; b < kReductionBlocks; ++b) {
        sum += s1[b];
        sum2 += s2[b];
    }
    const double n = static_cast<double>(n_gauss);
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) : 0.0;
    out.estimate = std::sqrt(mean);
    out.standard_error = out.estimate > 0.0 ? std::sqrt(var / n) / (2.0 * out.estimate) : 0.0;
    return out;
}

namespace {

std::pair<std::size_t, std::size_t> window_indices(const TimeGrid& grid, double s, double t) {
    if (!(s < t)) throw InputError("kw_integral: need s < t");
    auto index = [&](double x) {
        const double r = x / grid.dt();
        const double k = std::round(r);
        if (k < 0.0 || k > static_cast<double>(grid.steps()) || std::abs(r - k) > 1e-9 * std::max(1.0, k)) {
            throw InputError("kw_integral: time " + std::to_string(x) + " is not a grid node");
        }
        return static_cast<std::size_t>(k);
    };
    return {index(s), index(t)};
}

}  // namespace

StateVector kw_integral(const TimeGrid& grid, const Eigen::MatrixXd& f, double s, double t) {
    if (f.cols() != static_cast<Eigen::Index>(grid.nodes())) throw InputError("kw_integral: f must have N+1 samples");
    const auto [i, j] = window_indices(grid, s, t);
    StateVector acc = StateVector::Zero(f.rows());
    for (std::size_t k = i; k < j; ++k) acc += grid.dt() * f.col(static_cast<Eigen::Index>(k));
    return acc;
}

std::pair<StateVector, StateVector> bounded_operator_pushthrough(const Eigen::MatrixXd& b, const TimeGrid& grid,
                                                                 const Eigen::MatrixXd& f, double s, double t) {
    if (b.cols() != f.rows()) throw InputError("bounded_operator_pushthrough: dimension mismatch");
    const Eigen::MatrixXd bf = b * f;
    return {kw_integral(grid, bf, s, t), b * kw_integral(grid, f, s, t)};
}

ItoIsomorphismReport ito_isomorphism_report(const ProcessEnsemble& phi, const BrownianEnsemble& bm, double p) {
    if (!std::isfinite(p) || p <= 1.0) throw InputError("ito_isomorphism_report: p must be > 1");
    const Eigen::MatrixXd integral = ito_integral(phi, bm, phi.grid().steps());
    const auto paths = static_cast<Eigen::Index>(phi.paths());

    Eigen::VectorXd quad = Eigen::VectorXd::Zero(paths);
    for (std::size_t k = 0; k < phi.grid().steps(); ++k) {
        quad += phi.grid().dt() * phi.slice(k).colwise().squaredNorm().transpose();
    }

    ItoIsomorphismReport out;
    out.stochastic_norm = sample_lp_norm(integral, p);
    out.process_norm = lp_l2_norm(phi, p);
    if (out.process_norm == 0.0) {
        out.degenerate = true;
        out.ratio = 1.0;
        return out;
    }
    out.ratio = out.stochastic_norm / out.process_norm;

    const Eigen::ArrayXd diff = integral.colwise().squaredNorm().transpose().array() - quad.array();
    const double mean_q = quad.mean();
    const double n = static_cast<double>(paths);
    const double var = n > 1 ? (diff - diff.mean()).square().sum() / (n - 1.0) : 0.0;
    out.standard_error = std::sqrt(var / n) / (2.0 * mean_q);
    return out;
}

}  // namespace bsei
