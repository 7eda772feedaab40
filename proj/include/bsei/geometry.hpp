#pragma once

#include "bsei/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace bsei {

using StateVector = Eigen::VectorXd;

/// Tolerance for closed-form geometric branches (points, balls).
inline constexpr double kGeoTolExact = 1e-9;
/// Tolerance for the iterative polytope branches.
inline constexpr double kGeoTolIterative = 1e-6;
/// Iteration cap of the polytope projection.
inline constexpr int kPolytopeMaxIterations = 10'000;

struct Singleton {
    StateVector point;
};

struct Ball {
    StateVector center;
    double radius = 0.0;
};

/// Convex hull of the columns of `vertices` (d x n).
struct Polytope {
    Eigen::MatrixXd vertices;
};

/// Nonempty convex compact subset of R^d. Values are immutable after construction.
class ConvexCompactSet {
public:
    static ConvexCompactSet singleton(StateVector point);
    static ConvexCompactSet ball(StateVector center, double radius);
    static ConvexCompactSet polytope(Eigen::MatrixXd vertices);
    static ConvexCompactSet polytope(const std::vector<StateVector>& vertices);

    std::size_t dim() const;
    const std::variant<Singleton, Ball, Polytope>& shape() const { return shape_; }

    bool is_singleton() const { return std::holds_alternative<Singleton>(shape_); }
    bool is_ball() const { return std::holds_alternative<Ball>(shape_); }
    bool is_polytope() const { return std::holds_alternative<Polytope>(shape_); }

private:
    explicit ConvexCompactSet(std::variant<Singleton, Ball, Polytope> s) : shape_(std::move(s)) {}
    std::variant<Singleton, Ball, Polytope> shape_;
};

/// sup over x in the set of <x, direction>.
double support(const ConvexCompactSet& set, const StateVector& direction);

/// Euclidean distance from `point` to the set.
double distance_to(const StateVector& point, const ConvexCompactSet& set);

/// Metric projection of `point` onto the set. Throws NumericError if the
/// polytope solver does not certify optimality within the iteration cap; the
/// error carries the best iterate.
StateVector project(const StateVector& point, const ConvexCompactSet& set);

/// Hausdorff distance max(sup_{x in a} d(x, b), sup_{y in b} d(y, a)).
double hausdorff(const ConvexCompactSet& a, const ConvexCompactSet& b);

/// |A| = sup_{x in A} ||x||, i.e. hausdorff(A, {0}).
double magnitude(const ConvexCompactSet& set);

/// Deterministic net of unit directions used by the mixed-variant Hausdorff
/// branch and by the support-function comparisons: 64*d directions, plus the
/// signed coordinate axes when d >= 3.
std::vector<StateVector> direction_net(std::size_t dim);

/// Shape of the set-valued generator, fixed across (t, y, z).
struct SingletonShape {};
struct BallShape {
    double radius = 0.0;
};
struct PolytopeShape {
    Eigen::MatrixXd offsets;  ///< d x n vertex displacements from the center
};
using GeneratorShape = std::variant<SingletonShape, BallShape, PolytopeShape>;

/// G(t_k, y, z) = center(t_k, y, z) + shape, with the affine center map
/// c0(t_k) + A_y y + A_z z. `offsets` holds either one constant vector or one
/// vector per grid node.
class SetValuedSpec {
public:
    SetValuedSpec(std::vector<StateVector> offsets, Eigen::MatrixXd a_y, Eigen::MatrixXd a_z,
                  GeneratorShape shape, double lipschitz_k);

    std::size_t dim() const { return static_cast<std::size_t>(a_y_.rows()); }
    double lipschitz_k() const { return lipschitz_k_; }
    const GeneratorShape& shape() const { return shape_; }
    const Eigen::MatrixXd& a_y() const { return a_y_; }
    const Eigen::MatrixXd& a_z() const { return a_z_; }
    const std::vector<StateVector>& offsets() const { return offsets_; }
    bool time_dependent() const { return offsets_.size() > 1; }

    /// Offset c0 at grid node k (constant offsets ignore k).
    const StateVector& offset(std::size_t k) const;

    StateVector center(std::size_t k, const StateVector& y, const StateVector& z) const;
    ConvexCompactSet evaluate(std::size_t k, const StateVector& y, const StateVector& z) const;

    /// project(x, evaluate(k, y, z)) without materializing the set for the
    /// closed-form shapes.
    StateVector select(std::size_t k, const StateVector& y, const StateVector& z,
                       const StateVector& x) const;

    /// Column-wise select over d x M samples; `out` may alias `x`.
    void select_slice(std::size_t k, const Eigen::Ref<const Eigen::MatrixXd>& y,
                      const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      Eigen::Ref<Eigen::MatrixXd> out) const;

private:
    std::vector<StateVector> offsets_;
    Eigen::MatrixXd a_y_;
    Eigen::MatrixXd a_z_;
    GeneratorShape shape_;
    double lipschitz_k_;
};

/// Largest observed ratio rho(G(t,y,z), G(t,y',z')) / (|y-y'| + |z-z'|) over
/// random draws. Validates, does not certify, the declared constant.
double probe_lipschitz(const SetValuedSpec& spec, std::size_t n_samples, std::uint64_t seed);

/// Polytope projection failure; `best()` is the last feasible iterate.
class PolytopeProjectionError : public NumericError {
public:
    PolytopeProjectionError(const std::string& what, StateVector best)
        : NumericError(what), best_(std::move(best)) {}
    const StateVector& best() const { return best_; }

private:
    StateVector best_;
};

}  // namespace bsei
