#include "bsei/semigroup.hpp"

#include "bsei/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace bsei {

Generator::Generator(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() < 1 || matrix_.rows() != matrix_.cols()) {
        throw InputError("generator: matrix must be square with d >= 1");
    }
    if (!matrix_.allFinite()) throw InputError("generator: non-finite entry");
}

bool Generator::is_symmetric() const { return matrix_.isApprox(matrix_.transpose(), 0.0); }

Eigen::MatrixXd matrix_exponential_pade13(const Eigen::MatrixXd& m) {
    // Higham, "The scaling and squaring method for the matrix exponential revisited" (2005).
    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const auto n = m.rows();
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    const Eigen::MatrixXd a = m / std::ldexp(1.0, squarings);

    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    const Eigen::MatrixXd u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const Eigen::MatrixXd v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    const Eigen::MatrixXd v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw InputError("matrix_exponential: matrix must be square");
    if (m.isApprox(m.transpose(), 0.0)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        const Eigen::MatrixXd& q = eig.eigenvectors();
        return q * eig.eigenvalues().array().exp().matrix().asDiagonal() * q.transpose();
    }
    return matrix_exponential_pade13(m);
}

SemigroupCache::SemigroupCache(Generator generator, double step, std::size_t steps)
    : generator_(std::move(generator)), step_(step) {
    if (!std::isfinite(step_) || step_ <= 0.0) throw InputError("semigroup cache: step must be positive");
    const auto n = static_cast<Eigen::Index>(generator_.dim());
    powers_.reserve(steps + 1);
    powers_.push_back(Eigen::MatrixXd::Identity(n, n));
    for (std::size_t k = 1; k <= steps; ++k) {
        powers_.push_back(matrix_exponential(static_cast<double>(k) * step_ * generator_.matrix()));
    }
    gamma_bound_ = 1.0;
    for (const auto& p : powers_) {
        const double op = Eigen::JacobiSVD<Eigen::MatrixXd>(p).singularValues()[0];
        gamma_bound_ = std::max(gamma_bound_, op);
    }
}

const Eigen::MatrixXd& SemigroupCache::at_index(std::size_t k) const {
    if (k >= powers_.size()) {
        throw InputError("semigroup: grid index " + std::to_string(k) + " beyond cached range");
    }
    return powers_[k];
}

std::size_t SemigroupCache::index_of(double t) const {
    if (!std::isfinite(t) || t < 0.0) throw InputError("semigroup: time must be finite and >= 0");
    const double ratio = t / step_;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) > 1e-9 * std::max(1.0, ratio)) {
        throw InputError("semigroup: time " + std::to_string(t) + " is not on the cached grid");
    }
    const auto k = static_cast<std::size_t>(nearest);
    if (k >= powers_.size()) throw InputError("semigroup: time " + std::to_string(t) + " beyond cached range");
    return k;
}

StateVector SemigroupCache::apply(double t, const StateVector& x) const { return apply_index(index_of(t), x); }

StateVector SemigroupCache::apply_index(std::size_t k, const StateVector& x) const {
    const auto& s = at_index(k);
    if (x.size() != s.cols()) throw InputError("semigroup: state dimension mismatch");
    return s * x;
}

StateVector SemigroupCache::convolve(const Eigen::MatrixXd& f, std::size_t first, std::size_t last) const {
    if (first >= last || last > steps()) throw InputError("semigroup convolve: need first < last <= steps");
    if (f.rows() != static_cast<Eigen::Index>(generator_.dim()) ||
        f.cols() < static_cast<Eigen::Index>(last)) {
        throw InputError("semigroup convolve: sample matrix has the wrong shape");
    }
    StateVector acc = StateVector::Zero(f.rows());
    for (std::size_t k = first; k < last; ++k) {
        acc += step_ * (powers_[k - first] * f.col(static_cast<Eigen::Index>(k)));
    }
    return acc;
}

}  // namespace bsei
