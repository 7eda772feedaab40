#pragma once

#include "bsei/geometry.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace bsei {

/// Generator A of the semigroup S(t) = exp(tA), a finite d x d matrix.
class Generator {
public:
    explicit Generator(Eigen::MatrixXd matrix);

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
    bool is_symmetric() const;

private:
    Eigen::MatrixXd matrix_;
};

/// exp(M) by eigendecomposition for symmetric M, otherwise scaling and
/// squaring with the degree-13 Pade approximant.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m);

/// Scaling-and-squaring branch alone, exposed for cross-checks.
Eigen::MatrixXd matrix_exponential_pade13(const Eigen::MatrixXd& m);

/// exp(k * step * A) for k = 0..steps. Immutable after construction.
class SemigroupCache {
public:
    SemigroupCache(Generator generator, double step, std::size_t steps);

    const Generator& generator() const { return generator_; }
    double step() const { return step_; }
    std::size_t steps() const { return powers_.size() - 1; }

    /// S(k * step).
    const Eigen::MatrixXd& at_index(std::size_t k) const;
    /// Grid index of time t; throws InputError if t is off-grid or out of range.
    std::size_t index_of(double t) const;

    StateVector apply(double t, const StateVector& x) const;
    StateVector apply_index(std::size_t k, const StateVector& x) const;

    /// max_k ||S(k * step)||_2, the uniform bound standing in for the
    /// gamma-bound in the Euclidean setting.
    double gamma_bound() const { return gamma_bound_; }

    /// sum_{k=first}^{last-1} step * S(t_k - t_first) f_k, where f holds one
    /// sample per grid node (d x (steps+1)).
    StateVector convolve(const Eigen::MatrixXd& f, std::size_t first, std::size_t last) const;

private:
    Generator generator_;
    double step_;
    std::vector<Eigen::MatrixXd> powers_;
    double gamma_bound_ = 1.0;
};

}  // namespace bsei
