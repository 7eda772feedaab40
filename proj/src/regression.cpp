#include "bsei/regression.hpp"

#include "bsei/error.hpp"
#include "bsei/parallel.hpp"

#include <array>
#include <cmath>
#include <string>

namespace bsei {

namespace {

void enumerate_exponents(std::size_t n, std::size_t degree, std::vector<unsigned>& current, std::size_t pos,
                         std::size_t budget, std::vector<std::vector<unsigned>>& out) {
    if (pos == n) {
        out.push_back(current);
        return;
    }
    for (std::size_t e = 0; e <= budget; ++e) {
        current[pos] = static_cast<unsigned>(e);
        enumerate_exponents(n, degree, current, pos + 1, budget - e, out);
    }
    current[pos] = 0;
}

/// Sums per-block partial products X^T T in block order, independent of threads.
template <typename RowFn>
Eigen::MatrixXd blocked_cross(std::size_t paths, Eigen::Index rows, Eigen::Index cols, RowFn&& accumulate) {
    std::array<Eigen::MatrixXd, kReductionBlocks> partial;
    parallel_blocks(paths, [&](std::size_t b, std::size_t begin, std::size_t end) {
        partial[b] = Eigen::MatrixXd::Zero(rows, cols);
        accumulate(partial[b], begin, end);
    });
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& p : partial) total += p;
    return total;
}

}  // namespace

PolynomialBasis::PolynomialBasis(std::size_t n_features, std::size_t degree)
    : n_features_(n_features), degree_(degree) {
    if (n_features_ == 0) {
        exponents_.emplace_back();
        return;
    }
    std::vector<unsigned> current(n_features_, 0);
    enumerate_exponents(n_features_, degree_, current, 0, degree_, exponents_);
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
        unsigned sa = 0, sb = 0;
        for (unsigned e : a) sa += e;
        for (unsigned e : b) sb += e;
        return sa < sb;
    });
}

void PolynomialBasis::evaluate(const double* x, double* out) const {
    for (std::size_t j = 0; j < exponents_.size(); ++j) {
        double v = 1.0;
        for (std::size_t i = 0; i < n_features_; ++i) {
            for (unsigned e = 0; e < exponents_[j][i]; ++e) v *= x[i];
        }
        out[j] = v;
    }
}

namespace {

Eigen::MatrixXd standardize(const Eigen::Ref<const Eigen::MatrixXd>& raw) {
    const Eigen::Index m = raw.cols();
    std::vector<Eigen::Index> keep;
    std::vector<double> center, scale;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const double mu = raw.row(i).mean();
        const double var = (raw.row(i).array() - mu).square().sum() / static_cast<double>(m);
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * (std::abs(mu) + 1e-300)) || sd == 0.0) continue;
        keep.push_back(i);
        center.push_back(mu);
        scale.push_back(sd);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), m);
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.row(static_cast<Eigen::Index>(j)) = (raw.row(keep[j]).array() - center[j]) / scale[j];
    }
    return out;
}

}  // namespace

Regressor::Regressor(const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree)
    : features_(standardize(features)), basis_(static_cast<std::size_t>(features_.rows()), degree) {
    if (features.cols() < 1) throw InputError("regression: no paths");
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        if (!features.row(i).allFinite()) throw InputError("regression: non-finite feature values");
    }
    factorize();
}

Regressor::Regressor(const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree,
                     std::span<const double> increments, double dt)
    : features_(standardize(features)), basis_(static_cast<std::size_t>(features_.rows()), degree) {
    if (features.cols() < 1) throw InputError("regression: no paths");
    if (increments.size() != static_cast<std::size_t>(features.cols())) {
        throw InputError("regression: increments and features disagree on the path count");
    }
    if (!(dt > 0.0)) throw InputError("regression: dt must be positive");
    inv_sqrt_dt_ = 1.0 / std::sqrt(dt);
    increments_.resize(increments.size());
    for (std::size_t m = 0; m < increments.size(); ++m) increments_[m] = increments[m] * inv_sqrt_dt_;
    factorize();
}

std::size_t Regressor::design_size() const { return basis_.size() * (increments_.empty() ? 1 : 2); }

void Regressor::design_row(Eigen::Index m, double* row) const {
    const std::size_t b = basis_.size();
    basis_.evaluate(features_.col(m).data(), row);
    if (!increments_.empty()) {
        const double w = increments_[static_cast<std::size_t>(m)];
        for (std::size_t j = 0; j < b; ++j) row[b + j] = row[j] * w;
    }
}

void Regressor::factorize() {
    const std::size_t paths = static_cast<std::size_t>(features_.cols());
    const auto p = static_cast<Eigen::Index>(design_size());
    if (paths < kPathsPerBasisFunction * design_size()) {
        throw InputError("regression: " + std::to_string(paths) + " paths for a design of size " +
                         std::to_string(design_size()) + "; need at least " +
                         std::to_string(kPathsPerBasisFunction * design_size()));
    }
    const Eigen::MatrixXd gram = blocked_cross(paths, p, p, [&](Eigen::MatrixXd& acc, std::size_t b, std::size_t e) {
        Eigen::VectorXd row(p);
        for (std::size_t m = b; m < e; ++m) {
            design_row(static_cast<Eigen::Index>(m), row.data());
            acc.selfadjointView<Eigen::Lower>().rankUpdate(row);
        }
    });
    Eigen::MatrixXd full = gram.selfadjointView<Eigen::Lower>();

    const Eigen::VectorXd diag = full.diagonal();
    bool deficient = (diag.array() <= 0.0).any();
    if (!deficient) {
        const Eigen::VectorXd inv = diag.array().rsqrt();
        const Eigen::MatrixXd scaled = inv.asDiagonal() * full * inv.asDiagonal();
        const Eigen::VectorXd ev =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(scaled, Eigen::EigenvaluesOnly).eigenvalues();
        deficient = !(ev.minCoeff() > 1e-12 * ev.maxCoeff());
    }
    if (deficient) {
        const double lambda = kRidgeRelative * full.trace() / static_cast<double>(p);
        full.diagonal().array() += lambda > 0.0 ? lambda : kRidgeRelative;
        ridge_used_ = true;
    }
    solver_.compute(full);
    if (solver_.info() != Eigen::Success) throw NumericError("regression: factorization of the normal equations failed");
}

Regressor::Fit Regressor::fit(const Eigen::Ref<const Eigen::MatrixXd>& targets) const {
    const std::size_t paths = this->paths();
    if (static_cast<std::size_t>(targets.cols()) != paths) {
        throw InputError("regression: targets have " + std::to_string(targets.cols()) + " paths, expected " +
                         std::to_string(paths));
    }
    const auto p = static_cast<Eigen::Index>(design_size());
    const Eigen::Index q = targets.rows();
    const Eigen::MatrixXd rhs = blocked_cross(paths, p, q, [&](Eigen::MatrixXd& acc, std::size_t b, std::size_t e) {
        Eigen::VectorXd row(p);
        for (std::size_t m = b; m < e; ++m) {
            design_row(static_cast<Eigen::Index>(m), row.data());
            acc.noalias() += row * targets.col(static_cast<Eigen::Index>(m)).transpose();
        }
    });

    Fit out;
    out.coefficients = solver_.solve(rhs);
    if (!out.coefficients.allFinite()) throw NumericError("regression: non-finite coefficients");

    const auto b = static_cast<Eigen::Index>(basis_.size());
    const bool joint = !increments_.empty();
    out.mean.resize(q, static_cast<Eigen::Index>(paths));
    if (joint) out.slope.resize(q, static_cast<Eigen::Index>(paths));
    const Eigen::MatrixXd c_mean = out.coefficients.topRows(b).transpose();
    const Eigen::MatrixXd c_slope = joint ? Eigen::MatrixXd(out.coefficients.bottomRows(b).transpose() * inv_sqrt_dt_)
                                          : Eigen::MatrixXd();
    parallel_blocks(paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::VectorXd phi(b);
        for (std::size_t mm = begin; mm < end; ++mm) {
            const auto m = static_cast<Eigen::Index>(mm);
            basis_.evaluate(features_.col(m).data(), phi.data());
            out.mean.col(m).noalias() = c_mean * phi;
            if (joint) out.slope.col(m).noalias() = c_slope * phi;
        }
    });
    return out;
}

RegressionResult conditional_expectation(const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree) {
    if (targets.cols() != features.cols()) throw InputError("conditional_expectation: path counts differ");
    const Regressor reg(features, degree);
    Regressor::Fit f = reg.fit(targets);
    return {std::move(f.mean), std::move(f.coefficients), reg.ridge_used()};
}

RegressionCache::RegressionCache(const BrownianEnsemble& bm, std::size_t degree) : degree_(degree) {
    const std::size_t n = bm.grid().steps();
    steps_.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto w = bm.values(k);
        const Eigen::Map<const Eigen::MatrixXd> features(w.data(), 1, static_cast<Eigen::Index>(w.size()));
        try {
            steps_.emplace_back(features, degree, bm.increments(k), bm.grid().dt());
        } catch (const InputError& e) {
            throw InputError(std::string(e.what()) + " (time index " + std::to_string(k) + ")");
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (time index " + std::to_string(k) + ")");
        }
    }
}

std::vector<std::size_t> RegressionCache::ridge_steps() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < steps_.size(); ++k) {
        if (steps_[k].ridge_used()) out.push_back(k);
    }
    return out;
}

double represent_target(const Eigen::MatrixXd& g_u, std::size_t u, std::size_t first, const BrownianEnsemble& bm,
                        const RegressionCache& regs, const KernelVisitor& visit, Eigen::MatrixXd* base) {
    if (first > u || u > regs.steps()) throw InputError("represent_target: bad window");
    const auto paths = static_cast<Eigen::Index>(bm.paths());
    if (g_u.cols() != paths) throw InputError("represent_target: target has the wrong path count");
    Eigen::MatrixXd m = g_u;
    Eigen::MatrixXd stochastic = Eigen::MatrixXd::Zero(g_u.rows(), paths);
    for (std::size_t k = u; k-- > first;) {
        Regressor::Fit fit = regs.at(k).fit(m);
        const auto dw = bm.increments(k);
        const Eigen::Map<const Eigen::RowVectorXd> dw_row(dw.data(), paths);
        stochastic += fit.slope * dw_row.asDiagonal();
        if (visit) visit(k, fit.slope);
        m = std::move(fit.mean);
    }
    const Eigen::MatrixXd r = g_u - m - stochastic;
    if (base) *base = std::move(m);
    return std::sqrt(r.colwise().squaredNorm().mean());
}

MartingaleRepresentation martingale_representation(const ProcessEnsemble& g, const BrownianEnsemble& bm,
                                                   std::size_t degree) {
    const RegressionCache regs(bm, degree);
    return martingale_representation(g, bm, regs);
}

MartingaleRepresentation martingale_representation(const ProcessEnsemble& g, const BrownianEnsemble& bm,
                                                   const RegressionCache& regs) {
    if (g.lookahead() != 0) throw ContractError("martingale_representation: g must be adapted");
    if (!(g.grid() == bm.grid()) || g.paths() != bm.paths()) {
        throw InputError("martingale_representation: process and Brownian ensemble differ in shape");
    }
    const std::size_t n = g.grid().steps();
    MartingaleRepresentation out{Eigen::MatrixXd(), KernelEnsemble(g.grid(), g.paths(), g.dim(), 0, n), {}, false};
    out.mean_part.resize(static_cast<Eigen::Index>(g.dim()), static_cast<Eigen::Index>(n + 1));
    out.residual.resize(n + 1);
    Eigen::MatrixXd base;
    for (std::size_t u = 0; u <= n; ++u) {
        out.residual[u] = represent_target(
            g.slice(u), u, 0, bm, regs, [&](std::size_t s, const Eigen::MatrixXd& tau) { out.kernel.at(u, s) = tau; },
            &base);
        out.mean_part.col(static_cast<Eigen::Index>(u)) = base.rowwise().mean();
    }
    out.ridge_used = !regs.ridge_steps().empty();
    return out;
}

}  // namespace bsei
