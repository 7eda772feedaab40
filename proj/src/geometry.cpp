#include "bsei/geometry.hpp"

#include "bsei/parallel.hpp"
#include "bsei/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace bsei {

namespace {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

void require_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
    }
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Euclidean projection of v onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += u[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

struct PolytopeProjection {
    StateVector point;
    double gap = 0.0;  // Frank-Wolfe gap, bounds 0.5*|point - optimum|^2
};

// Frank-Wolfe gap of the feasible point theta for min 0.5|theta - x|^2 over conv(V).
double fw_gap(const Eigen::MatrixXd& V, const StateVector& x, const StateVector& theta) {
    const StateVector r = theta - x;
    const double min_vertex = (V.transpose() * r).minCoeff();
    return std::max(0.0, r.dot(theta) - min_vertex);
}

// Exact minimizer on the affine hull of the support, accepted only if it is
// a convex combination and improves the certificate.
void polish(const Eigen::MatrixXd& V, const StateVector& x, const Eigen::VectorXd& lambda,
            PolytopeProjection& best) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
        if (lambda[j] > 1e-12) support.push_back(j);
    }
    if (support.empty()) return;
    const auto s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd Vs(V.rows(), s);
    for (Eigen::Index i = 0; i < s; ++i) Vs.col(i) = V.col(support[static_cast<std::size_t>(i)]);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    kkt.topLeftCorner(s, s) = Vs.transpose() * Vs;
    kkt.block(0, s, s, 1).setOnes();
    kkt.block(s, 0, 1, s).setOnes();
    Eigen::VectorXd rhs(s + 1);
    rhs.head(s) = Vs.transpose() * x;
    rhs[s] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd mu = sol.head(s);
    if (!mu.allFinite() || mu.minCoeff() < -1e-12) return;
    mu = mu.cwiseMax(0.0);
    const double total = mu.sum();
    if (total <= 0.0) return;
    mu /= total;
    const StateVector theta = Vs * mu;
    const double gap = fw_gap(V, x, theta);
    if (gap <= best.gap) best = PolytopeProjection{theta, gap};
}

PolytopeProjection project_polytope(const StateVector& x, const Eigen::MatrixXd& V) {
    const Eigen::Index n = V.cols();
    if (n == 1) return {V.col(0), 0.0};

    const Eigen::MatrixXd gram = V.transpose() * V;
    const Eigen::VectorXd b = V.transpose() * x;
    const double lipschitz =
        std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                     .eigenvalues()
                     .maxCoeff(),
                 std::numeric_limits<double>::min());

    const double scale = std::max({1.0, x.norm(), V.colwise().norm().maxCoeff()});
    const double target_gap = 0.5 * std::pow(1e-3 * kGeoTolIterative * scale, 2);

    Eigen::Index nearest = 0;
    (V.colwise() - x).colwise().squaredNorm().minCoeff(&nearest);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
    lambda[nearest] = 1.0;

    PolytopeProjection best{V * lambda, fw_gap(V, x, V * lambda)};
    Eigen::VectorXd momentum = lambda;
    double t = 1.0;
    for (int it = 0; it < kPolytopeMaxIterations && best.gap > target_gap; ++it) {
        const Eigen::VectorXd grad = gram * momentum - b;
        const Eigen::VectorXd next = project_simplex(momentum - grad / lipschitz);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const Eigen::VectorXd step = next - lambda;
        // Adaptive restart when the objective goes up along the momentum.
        if ((gram * lambda - b).dot(step) > 0.0) {
            momentum = lambda;
            t = 1.0;
            continue;
        }
        momentum = next + ((t - 1.0) / t_next) * step;
        lambda = next;
        t = t_next;

        if (it % 16 == 0) {
            const StateVector theta = V * lambda;
            const double gap = fw_gap(V, x, theta);
            if (gap < best.gap) best = PolytopeProjection{theta, gap};
            if (it % 64 == 0) polish(V, x, lambda, best);
        }
    }
    polish(V, x, lambda, best);
    const StateVector theta = V * lambda;
    const double gap = fw_gap(V, x, theta);
    if (gap < best.gap) best = PolytopeProjection{theta, gap};

    if (std::sqrt(2.0 * best.gap) > kGeoTolIterative * scale) {
        throw PolytopeProjectionError(
            "polytope projection did not converge within " +
                std::to_string(kPolytopeMaxIterations) + " iterations (gap " +
                std::to_string(best.gap) + ")",
            best.point);
    }
    return best;
}

// Distance from c to the relative boundary of P when c lies in P, computed as
// min_{|u|=1} (h_P(u) - <c,u>). Zero for lower-dimensional P.
double depth_in_polytope(const StateVector& c, const Eigen::MatrixXd& V) {
    const auto d = V.rows();
    const auto n = V.cols();
    if (d == 1) {
        return std::max(0.0, std::min(c[0] - V.row(0).minCoeff(), V.row(0).maxCoeff() - c[0]));
    }
    const Eigen::MatrixXd centered = V.colwise() - V.col(0);
    if (n <= d || Eigen::FullPivLU<Eigen::MatrixXd>(centered).rank() < d) return 0.0;

    // Enumerate d-subsets; keep the supporting hyperplanes (facets).
    double binom = 1.0;
    for (Eigen::Index i = 0; i < d; ++i) binom *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());

    if (binom <= 2e5) {
        double depth = std::numeric_limits<double>::infinity();
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
        std::iota(idx.begin(), idx.end(), 0);
        Eigen::MatrixXd edges(d - 1, d);
        while (true) {
            for (Eigen::Index i = 1; i < d; ++i) {
                edges.row(i - 1) = (V.col(idx[static_cast<std::size_t>(i)]) - V.col(idx[0])).transpose();
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
            if (lu.rank() == d - 1) {
                StateVector normal = lu.kernel().col(0).normalized();
                const double offset = normal.dot(V.col(idx[0]));
                const Eigen::VectorXd side = (V.transpose() * normal).array() - offset;
                const double tol = 1e-12 * scale;
                if (side.maxCoeff() <= tol || side.minCoeff() >= -tol) {
                    if (side.maxCoeff() > tol) normal = -normal;
                    depth = std::min(depth, normal.dot(V.col(idx[0])) - normal.dot(c));
                }
            }
            // next combination
            Eigen::Index i = d - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - d + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (Eigen::Index j = i + 1; j < d; ++j) {
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
        return std::max(0.0, depth);
    }

    // Too many vertices to enumerate facets: minimize over the direction net.
    double depth = std::numeric_limits<double>::infinity();
    for (const StateVector& u : direction_net(static_cast<std::size_t>(d))) {
        depth = std::min(depth, (V.transpose() * u).maxCoeff() - c.dot(u));
    }
    return std::max(0.0, depth);
}

// sup_{x in a} d(x, b)
double excess(const ConvexCompactSet& a, const ConvexCompactSet& b) {
    return std::visit(
        overloaded{
            [&](const Singleton& s) { return distance_to(s.point, b); },
            [&](const Polytope& p) {
                double e = 0.0;
                for (Eigen::Index j = 0; j < p.vertices.cols(); ++j) {
                    e = std::max(e, distance_to(p.vertices.col(j), b));
                }
                return e;
            },
            [&](const Ball& ball) {
                return std::visit(
                    overloaded{
                        [&](const Singleton& s) { return (ball.center - s.point).norm() + ball.radius; },
                        [&](const Ball& other) {
                            return std::max(0.0, (ball.center - other.center).norm() + ball.radius -
                                                     other.radius);
                        },
                        [&](const Polytope& p) {
                            const double dc =
                                (project_polytope(ball.center, p.vertices).point - ball.center).norm();
                            if (dc > kGeoTolIterative) return dc + ball.radius;
                            return std::max(0.0, ball.radius - depth_in_polytope(ball.center, p.vertices));
                        },
                    },
                    b.shape());
            },
        },
        a.shape());
}

}  // namespace

ConvexCompactSet ConvexCompactSet::singleton(StateVector point) {
    if (point.size() < 1) throw InputError("singleton: empty state vector");
    if (!all_finite(point)) throw InputError("singleton: non-finite coordinate");
    return ConvexCompactSet(Singleton{std::move(point)});
}

ConvexCompactSet ConvexCompactSet::ball(StateVector center, double radius) {
    if (center.size() < 1) throw InputError("ball: empty center");
    if (!all_finite(center)) throw InputError("ball: non-finite center");
    if (!std::isfinite(radius) || radius < 0.0) throw InputError("ball: radius must be finite and >= 0");
    return ConvexCompactSet(Ball{std::move(center), radius});
}

ConvexCompactSet ConvexCompactSet::polytope(Eigen::MatrixXd vertices) {
    if (vertices.rows() < 1 || vertices.cols() < 1) throw InputError("polytope: empty vertex list");
    if (!all_finite(vertices)) throw InputError("polytope: non-finite vertex coordinate");
    return ConvexCompactSet(Polytope{std::move(vertices)});
}

ConvexCompactSet ConvexCompactSet::polytope(const std::vector<StateVector>& vertices) {
    if (vertices.empty()) throw InputError("polytope: empty vertex list");
    Eigen::MatrixXd V(vertices.front().size(), static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t j = 0; j < vertices.size(); ++j) {
        require_dim(static_cast<std::size_t>(vertices[j].size()), static_cast<std::size_t>(V.rows()),
                    "polytope");
        V.col(static_cast<Eigen::Index>(j)) = vertices[j];
    }
    return polytope(std::move(V));
}

std::size_t ConvexCompactSet::dim() const {
    return std::visit(overloaded{[](const Singleton& s) { return static_cast<std::size_t>(s.point.size()); },
                                 [](const Ball& b) { return static_cast<std::size_t>(b.center.size()); },
                                 [](const Polytope& p) { return static_cast<std::size_t>(p.vertices.rows()); }},
                      shape_);
}

double support(const ConvexCompactSet& set, const StateVector& direction) {
    if (!all_finite(direction)) throw InputError("support: non-finite direction");
    require_dim(set.dim(), static_cast<std::size_t>(direction.size()), "support");
    return std::visit(
        overloaded{[&](const Singleton& s) { return s.point.dot(direction); },
                   [&](const Ball& b) { return b.center.dot(direction) + b.radius * direction.norm(); },
                   [&](const Polytope& p) { return (p.vertices.transpose() * direction).maxCoeff(); }},
        set.shape());
}

StateVector project(const StateVector& point, const ConvexCompactSet& set) {
    require_dim(set.dim(), static_cast<std::size_t>(point.size()), "project");
    return std::visit(overloaded{[&](const Singleton& s) -> StateVector { return s.point; },
                                 [&](const Ball& b) -> StateVector {
                                     const StateVector diff = point - b.center;
                                     const double n = diff.norm();
                                     if (n <= b.radius) return point;
                                     return b.center + (b.radius / n) * diff;
                                 },
                                 [&](const Polytope& p) -> StateVector {
                                     return project_polytope(point, p.vertices).point;
                                 }},
                      set.shape());
}

double distance_to(const StateVector& point, const ConvexCompactSet& set) {
    require_dim(set.dim(), static_cast<std::size_t>(point.size()), "distance_to");
    if (const auto* b = std::get_if<Ball>(&set.shape())) {
        return std::max(0.0, (point - b->center).norm() - b->radius);
    }
    return (project(point, set) - point).norm();
}

double hausdorff(const ConvexCompactSet& a, const ConvexCompactSet& b) {
    require_dim(a.dim(), b.dim(), "hausdorff");
    // Canonical evaluation order keeps the result bitwise symmetric.
    const double ab = excess(a, b);
    const double ba = excess(b, a);
    return std::max(ab, ba);
}

double magnitude(const ConvexCompactSet& set) {
    return hausdorff(set, ConvexCompactSet::singleton(StateVector::Zero(static_cast<Eigen::Index>(set.dim()))));
}

std::vector<StateVector> direction_net(std::size_t dim) {
    if (dim == 0) throw InputError("direction_net: dimension must be >= 1");
    std::vector<StateVector> net;
    const auto d = static_cast<Eigen::Index>(dim);
    if (dim == 1) {
        net.emplace_back(StateVector::Constant(1, 1.0));
        net.emplace_back(StateVector::Constant(1, -1.0));
        return net;
    }
    const std::size_t count = 64 * dim;
    net.reserve(count + 2 * dim);
    if (dim == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
            StateVector u(2);
            u << std::cos(angle), std::sin(angle);
            net.push_back(u);
        }
        return net;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        net.emplace_back(StateVector::Unit(d, i));
        net.emplace_back(-StateVector::Unit(d, i));
    }
    const Philox4x32 rng(0x6e65742d64697273ULL);
    for (std::size_t i = 0; i < count; ++i) {
        StateVector u(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            u[j] = rng.normal(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0);
        }
        net.push_back(u.normalized());
    }
    return net;
}

SetValuedSpec::SetValuedSpec(std::vector<StateVector> offsets, Eigen::MatrixXd a_y, Eigen::MatrixXd a_z,
                             GeneratorShape shape, double lipschitz_k)
    : offsets_(std::move(offsets)),
      a_y_(std::move(a_y)),
      a_z_(std::move(a_z)),
      shape_(std::move(shape)),
      lipschitz_k_(lipschitz_k) {
    const auto d = a_y_.rows();
    if (d < 1 || a_y_.cols() != d || a_z_.rows() != d || a_z_.cols() != d) {
        throw InputError("set-valued spec: A_y and A_z must be square and of equal size");
    }
    if (!a_y_.allFinite() || !a_z_.allFinite()) throw InputError("set-valued spec: non-finite matrix entry");
    if (offsets_.empty()) throw InputError("set-valued spec: offset samples are empty");
    for (const auto& c : offsets_) {
        if (c.size() != d) throw InputError("set-valued spec: offset dimension mismatch");
        if (!c.allFinite()) throw InputError("set-valued spec: non-finite offset");
    }
    if (!std::isfinite(lipschitz_k_) || lipschitz_k_ < 0.0) {
        throw InputError("set-valued spec: lipschitz_K must be finite and >= 0");
    }
    std::visit(overloaded{[](const SingletonShape&) {},
                          [](const BallShape& b) {
                              if (!std::isfinite(b.radius) || b.radius < 0.0) {
                                  throw InputError("set-valued spec: ball radius must be finite and >= 0");
                              }
                          },
                          [d](const PolytopeShape& p) {
                              if (p.offsets.rows() != d || p.offsets.cols() < 1) {
                                  throw InputError("set-valued spec: polytope offsets must be d x n, n >= 1");
                              }
                              if (!p.offsets.allFinite()) {
                                  throw InputError("set-valued spec: non-finite polytope offset");
                              }
                          }},
               shape_);
}

const StateVector& SetValuedSpec::offset(std::size_t k) const {
    if (offsets_.size() == 1) return offsets_.front();
    if (k >= offsets_.size()) throw InputError("set-valued spec: grid index beyond offset samples");
    return offsets_[k];
}

StateVector SetValuedSpec::center(std::size_t k, const StateVector& y, const StateVector& z) const {
    return offset(k) + a_y_ * y + a_z_ * z;
}

ConvexCompactSet SetValuedSpec::evaluate(std::size_t k, const StateVector& y, const StateVector& z) const {
    StateVector c = center(k, y, z);
    return std::visit(overloaded{[&](const SingletonShape&) { return ConvexCompactSet::singleton(std::move(c)); },
                                 [&](const BallShape& b) { return ConvexCompactSet::ball(std::move(c), b.radius); },
                                 [&](const PolytopeShape& p) {
                                     return ConvexCompactSet::polytope(
                                         Eigen::MatrixXd(p.offsets.colwise() + c));
                                 }},
                      shape_);
}

StateVector SetValuedSpec::select(std::size_t k, const StateVector& y, const StateVector& z,
                                  const StateVector& x) const {
    if (std::holds_alternative<SingletonShape>(shape_)) return center(k, y, z);
    if (const auto* b = std::get_if<BallShape>(&shape_)) {
        StateVector c = center(k, y, z);
        const StateVector diff = x - c;
        const double n = diff.norm();
        if (n <= b->radius) return x;
        return c + (b->radius / n) * diff;
    }
    return project(x, evaluate(k, y, z));
}

void SetValuedSpec::select_slice(std::size_t k, const Eigen::Ref<const Eigen::MatrixXd>& y,
                                 const Eigen::Ref<const Eigen::MatrixXd>& z,
                                 const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Ref<Eigen::MatrixXd> out) const {
    const auto d = static_cast<Eigen::Index>(dim());
    if (y.rows() != d || z.rows() != d || x.rows() != d || out.rows() != d || y.cols() != x.cols() ||
        z.cols() != x.cols() || out.cols() != x.cols()) {
        throw InputError("select_slice: shape mismatch");
    }
    Eigen::MatrixXd c = a_y_ * y + a_z_ * z;
    c.colwise() += offset(k);
    if (std::holds_alternative<SingletonShape>(shape_)) {
        out = c;
        return;
    }
    if (const auto* b = std::get_if<BallShape>(&shape_)) {
        const double r = b->radius;
        parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t mm) {
            const auto m = static_cast<Eigen::Index>(mm);
            const Eigen::VectorXd diff = x.col(m) - c.col(m);
            const double n = diff.norm();
            if (n <= r) {
                out.col(m) = x.col(m);
            } else {
                out.col(m) = c.col(m) + (r / n) * diff;
            }
        });
        return;
    }
    const auto& offsets = std::get<PolytopeShape>(shape_).offsets;
    parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t mm) {
        const auto m = static_cast<Eigen::Index>(mm);
        const Eigen::MatrixXd vertices = offsets.colwise() + c.col(m);
        out.col(m) = project_polytope(x.col(m), vertices).point;
    });
}

double probe_lipschitz(const SetValuedSpec& spec, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw InputError("probe_lipschitz: n_samples must be >= 1");
    const auto d = static_cast<Eigen::Index>(spec.dim());
    const Philox4x32 rng(seed);
    std::uint32_t counter = 0;
    auto gaussian = [&](std::uint32_t slot, Eigen::Index j) {
        return rng.normal(counter, slot, static_cast<std::uint32_t>(j));
    };

    double best = 0.0;
    std::size_t accepted = 0;
    while (accepted < n_samples) {
        // Draw modes cycle through joint, y-only and z-only perturbations.
        const std::size_t mode = accepted % 3;
        const auto k = static_cast<std::size_t>(rng.uniform(counter, 0xffu, 0) *
                                                static_cast<double>(spec.offsets().size()));
        const double scale = std::pow(10.0, -3.0 + 4.0 * rng.uniform(counter, 0xfeu, 0));
        StateVector y(d), z(d), dy(d), dz(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            y[j] = 3.0 * gaussian(1, j);
            z[j] = 3.0 * gaussian(2, j);
            dy[j] = mode == 2 ? 0.0 : scale * gaussian(3, j);
            dz[j] = mode == 1 ? 0.0 : scale * gaussian(4, j);
        }
        ++counter;
        const double denom = dy.norm() + dz.norm();
        if (denom == 0.0) continue;
        const std::size_t kk = std::min(k, spec.offsets().size() - 1);
        const double rho = hausdorff(spec.evaluate(kk, y, z), spec.evaluate(kk, y + dy, z + dz));
        best = std::max(best, rho / denom);
        ++accepted;
    }
    return best;
}

}  // namespace bsei
