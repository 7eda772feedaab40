#pragma once

#include "bsei/paths.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace bsei {

/// Terms with a Gram-Schmidt residual below this fraction of their norm are
/// treated as linearly dependent.
inline constexpr double kDependenceThreshold = 1e-10;

/// One rank-one term h (x) e, with h sampled at the quadrature nodes.
struct RankOneTerm {
    Eigen::VectorXd h;
    StateVector e;
};

/// Finite-rank operator sum_j h_j (x) e_j from L^2(s, t) to R^d. Functions
/// are sampled at quadrature nodes with nonnegative weights.
class FiniteRankOperator {
public:
    FiniteRankOperator(double s, double t, Eigen::VectorXd weights, std::vector<RankOneTerm> terms);

    /// Left-endpoint nodes s + i (t - s) / n, i < n, each with weight (t - s) / n.
    static FiniteRankOperator on_uniform_grid(double s, double t, std::size_t n, std::vector<RankOneTerm> terms);

    double s() const { return s_; }
    double t() const { return t_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const std::vector<RankOneTerm>& terms() const { return terms_; }
    std::size_t dim() const { return static_cast<std::size_t>(terms_.front().e.size()); }

    /// Node positions for the uniform-grid construction.
    static Eigen::VectorXd uniform_nodes(double s, double t, std::size_t n);

private:
    double s_;
    double t_;
    Eigen::VectorXd weights_;
    std::vector<RankOneTerm> terms_;
};

/// 1_A (x) e on a uniform grid of [s, t], with A the union of the given
/// grid-aligned intervals [a, b).
FiniteRankOperator indicator_operator(double s, double t, std::size_t n,
                                      const std::vector<std::pair<double, double>>& intervals, const StateVector& e);

struct GammaNormResult {
    double estimate = 0.0;        ///< Monte Carlo (E |sum_j gamma_j e~_j|^2)^{1/2}
    double exact = 0.0;           ///< (sum_j |e~_j|^2)^{1/2}
    double standard_error = 0.0;  ///< of the estimate
    std::size_t rank = 0;         ///< orthonormal directions kept
    bool dependent_terms = false; ///< some terms added no new direction
    std::vector<StateVector> transformed;  ///< e~_j
};

GammaNormResult gamma_norm(const FiniteRankOperator& op, std::size_t n_gauss, std::uint64_t seed);

/// Left Riemann sum of the grid samples f (d x (N+1)) over [s, t].
StateVector kw_integral(const TimeGrid& grid, const Eigen::MatrixXd& f, double s, double t);

/// Both sides of int_s^t B f(u) du = B int_s^t f(u) du.
std::pair<StateVector, StateVector> bounded_operator_pushthrough(const Eigen::MatrixXd& b, const TimeGrid& grid,
                                                                 const Eigen::MatrixXd& f, double s, double t);

struct ItoIsomorphismReport {
    double ratio = 1.0;
    double standard_error = 0.0;
    double stochastic_norm = 0.0;  ///< (E |int phi dW|^p)^{1/p}
    double process_norm = 0.0;     ///< lp_l2_norm(phi, p)
    bool degenerate = false;       ///< phi vanished; ratio set to 1
};

/// (E |int_0^T phi dW|^p)^{1/p} / |phi|_{L^p(Omega; L^2(0,T))}. The standard
/// error is the delta-method error of the p = 2 ratio.
ItoIsomorphismReport ito_isomorphism_report(const ProcessEnsemble& phi, const BrownianEnsemble& bm, double p);

}  // namespace bsei
