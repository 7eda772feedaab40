#pragma once

#include "bsei/paths.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bsei {

/// Ridge strength relative to trace(X^T X) / dim when the design is rank deficient.
inline constexpr double kRidgeRelative = 1e-10;
/// Minimum number of paths per basis function.
inline constexpr std::size_t kPathsPerBasisFunction = 10;

/// Monomials of total degree <= degree in `n_features` variables.
class PolynomialBasis {
public:
    PolynomialBasis(std::size_t n_features, std::size_t degree);

    std::size_t size() const { return exponents_.size(); }
    std::size_t n_features() const { return n_features_; }
    std::size_t degree() const { return degree_; }
    const std::vector<std::vector<unsigned>>& exponents() const { return exponents_; }

    /// out[j] = prod_i x[i]^exponents[j][i]
    void evaluate(const double* x, double* out) const;

private:
    std::size_t n_features_;
    std::size_t degree_;
    std::vector<std::vector<unsigned>> exponents_;
};

/// Least-squares projection onto polynomials of per-path features at one
/// time node, optionally joined with the same polynomials multiplied by the
/// next Brownian increment.
///
/// With increments, a target T is fitted as m(x) + c(x) dW / sqrt(dt), and
/// `fit` returns m (the conditional mean) and c(x) / sqrt(dt), the estimate
/// of (1/dt) E[T dW | F].
///
/// Features are centered and scaled by their sample moments; features with
/// no spread carry no information and are dropped. The Gram matrix is
/// factorized once and reused for every target.
class Regressor {
public:
    Regressor(const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree);
    Regressor(const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree,
              std::span<const double> increments, double dt);

    struct Fit {
        Eigen::MatrixXd mean;   ///< q x M fitted conditional mean
        Eigen::MatrixXd slope;  ///< q x M increment coefficient, empty without increments
        Eigen::MatrixXd coefficients;  ///< design size x q
    };

    Fit fit(const Eigen::Ref<const Eigen::MatrixXd>& targets) const;

    bool ridge_used() const { return ridge_used_; }
    std::size_t paths() const { return static_cast<std::size_t>(features_.cols()); }
    std::size_t design_size() const;
    const PolynomialBasis& basis() const { return basis_; }

private:
    void factorize();
    void design_row(Eigen::Index m, double* row) const;

    Eigen::MatrixXd features_;  // standardized, informative features only
    PolynomialBasis basis_;
    std::vector<double> increments_;  // dW / sqrt(dt), empty when not joint
    double inv_sqrt_dt_ = 0.0;
    Eigen::LDLT<Eigen::MatrixXd> solver_;
    bool ridge_used_ = false;
};

struct RegressionResult {
    Eigen::MatrixXd fitted;        ///< q x M
    Eigen::MatrixXd coefficients;  ///< basis size x q, in the standardized feature basis
    bool ridge_used = false;
};

/// Projection of per-path targets (q x M) onto polynomials of total degree
/// <= degree in the per-path features (f x M).
RegressionResult conditional_expectation(const Eigen::Ref<const Eigen::MatrixXd>& targets,
                                         const Eigen::Ref<const Eigen::MatrixXd>& features, std::size_t degree);

/// Joint regressors for every step k < N of a Brownian ensemble, with W_{t_k}
/// as the feature and dW_k as the increment.
class RegressionCache {
public:
    RegressionCache(const BrownianEnsemble& bm, std::size_t degree);

    const Regressor& at(std::size_t k) const { return steps_.at(k); }
    std::size_t steps() const { return steps_.size(); }
    std::size_t degree() const { return degree_; }
    /// Steps whose design needed the ridge fallback.
    std::vector<std::size_t> ridge_steps() const;

private:
    std::size_t degree_;
    std::vector<Regressor> steps_;
};

/// Called with (s, tau[u][s]) for every first <= s < u of one representation.
using KernelVisitor = std::function<void(std::size_t, const Eigen::MatrixXd&)>;

/// Represents one F_{t_u}-measurable target g_u (d x M) as
/// m + sum_{first <= s < u} tau[u][s] dW_s with m = E[g_u | F_{t_first}], by
/// backward regression. Returns the L^2(Omega) reconstruction residual;
/// `base` receives m when given.
double represent_target(const Eigen::MatrixXd& g_u, std::size_t u, std::size_t first, const BrownianEnsemble& bm,
                        const RegressionCache& regs, const KernelVisitor& visit, Eigen::MatrixXd* base = nullptr);

struct MartingaleRepresentation {
    Eigen::MatrixXd mean_part;  ///< d x (N+1), estimate of E g_u
    KernelEnsemble kernel;
    std::vector<double> residual;  ///< per u, L^2(Omega)
    bool ridge_used = false;
};

/// g_u = E g_u + sum_{s<u} tau[u][s] dW_s over the whole grid. The mean part
/// is the time-0 regression value, i.e. the ensemble mean of g_u with the
/// first increment as control variate.
MartingaleRepresentation martingale_representation(const ProcessEnsemble& g, const BrownianEnsemble& bm,
                                                   std::size_t degree);
MartingaleRepresentation martingale_representation(const ProcessEnsemble& g, const BrownianEnsemble& bm,
                                                   const RegressionCache& regs);

}  // namespace bsei
