#include "bsei/validation.hpp"

#include "bsei/error.hpp"
#include "bsei/gamma.hpp"
#include "bsei/geometry.hpp"
#include "bsei/paths.hpp"
#include "bsei/random.hpp"
#include "bsei/regression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace bsei {

bool SuiteReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.pass; });
}

nlohmann::json SuiteReport::to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["passed"] = passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
        j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"pass", c.pass}});
    }
    return j;
}

const std::vector<std::string>& validation_suites() {
    static const std::vector<std::string> names{"geometry", "gamma", "ito", "representation"};
    return names;
}

namespace {

/// Draw source with a running counter so every call gets a fresh variate.
class Draws {
public:
    explicit Draws(std::uint64_t seed) : rng_(seed) {}
    double normal() { return rng_.normal(next_++, 0u, 0u, 0x5eedu); }
    double uniform() { return rng_.uniform(next_++, 1u, 0u, 0x5eedu); }
    StateVector gaussian(Eigen::Index d) {
        StateVector v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

private:
    Philox4x32 rng_;
    std::uint32_t next_ = 0;
};

ConvexCompactSet random_set(Draws& r, Eigen::Index d) {
    const double u = r.uniform();
    if (u < 0.2) return ConvexCompactSet::singleton(r.gaussian(d));
    if (u < 0.6) return ConvexCompactSet::ball(r.gaussian(d), 2.0 * r.uniform());
    const auto n = static_cast<Eigen::Index>(d + 1 + static_cast<Eigen::Index>(4.0 * r.uniform()));
    Eigen::MatrixXd v(d, n);
    const StateVector c = r.gaussian(d);
    for (Eigen::Index j = 0; j < n; ++j) v.col(j) = c + r.gaussian(d);
    return ConvexCompactSet::polytope(v);
}

StateVector random_member(Draws& r, const ConvexCompactSet& set) {
    return std::visit(
        [&](const auto& s) -> StateVector {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Singleton>) {
                return s.point;
            } else if constexpr (std::is_same_v<T, Ball>) {
                StateVector dir = r.gaussian(s.center.size());
                const double n = dir.norm();
                if (n == 0.0) return s.center;
                return s.center + s.radius * r.uniform() * dir / n;
            } else {
                Eigen::VectorXd w(s.vertices.cols());
                for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = -std::log(r.uniform());
                return s.vertices * (w / w.sum());
            }
        },
        set.shape());
}

double tolerance_for(const ConvexCompactSet& a) {
    return a.is_polytope() ? kGeoTolIterative : kGeoTolExact;
}

void add(SuiteReport& rep, std::string name, double value, double bound, bool pass) {
    rep.checks.push_back({std::move(name), value, bound, pass});
}

void add_le(SuiteReport& rep, std::string name, double value, double bound) {
    add(rep, std::move(name), value, bound, value <= bound);
}

SuiteReport geometry_suite() {
    SuiteReport rep{"geometry", {}};
    Draws r(20240601);
    double worst_identity = 0.0, worst_symmetry = 0.0, worst_triangle = 0.0, worst_nonneg = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Eigen::Index d = 2 + (i % 2);
        const auto a = random_set(r, d), b = random_set(r, d), c = random_set(r, d);
        const double tau = std::max({tolerance_for(a), tolerance_for(b), tolerance_for(c)}) *
                           std::max({1.0, magnitude(a), magnitude(b), magnitude(c)});
        const double ab = hausdorff(a, b), ba = hausdorff(b, a), ac = hausdorff(a, c), bc = hausdorff(b, c);
        worst_identity = std::max(worst_identity, hausdorff(a, a) / tau);
        worst_symmetry = std::max(worst_symmetry, std::abs(ab - ba) / tau);
        worst_triangle = std::max(worst_triangle, (ac - ab - bc) / tau);
        worst_nonneg = std::max(worst_nonneg, -ab / tau);
    }
    add_le(rep, "hausdorff_identity_over_tau", worst_identity, 2.0);
    add_le(rep, "hausdorff_symmetry_over_tau", worst_symmetry, 2.0);
    add_le(rep, "hausdorff_triangle_excess_over_tau", worst_triangle, 2.0);
    add_le(rep, "hausdorff_negativity_over_tau", worst_nonneg, 0.0);

    double worst_ball = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Eigen::Index d = 1 + (i % 4);
        const StateVector c1 = r.gaussian(d), c2 = r.gaussian(d);
        const double r1 = r.uniform(), r2 = 3.0 * r.uniform();
        const double expected = (c1 - c2).norm() + std::abs(r1 - r2);
        worst_ball = std::max(worst_ball, std::abs(hausdorff(ConvexCompactSet::ball(c1, r1),
                                                             ConvexCompactSet::ball(c2, r2)) - expected));
    }
    add_le(rep, "ball_ball_formula_error", worst_ball, 1e-9);

    double worst_projection = 0.0;
    for (int i = 0; i < 60; ++i) {
        const Eigen::Index d = 2 + (i % 2);
        const auto s = random_set(r, d);
        const StateVector x = 2.0 * r.gaussian(d);
        const StateVector p = project(x, s);
        const double dp = (x - p).norm();
        const double tau = tolerance_for(s) * std::max(1.0, std::max(x.norm(), magnitude(s)));
        for (int j = 0; j < 1000; ++j) {
            worst_projection = std::max(worst_projection, (dp - (x - random_member(r, s)).norm()) / tau);
        }
    }
    add_le(rep, "projection_beats_competitors_over_tau", worst_projection, 1.0);
    return rep;
}

SuiteReport gamma_suite() {
    SuiteReport rep{"gamma", {}};
    StateVector e(2);
    e << 3.0, 4.0;
    const auto op = indicator_operator(0.0, 1.0, 1000, {{0.2, 0.7}}, e);
    const GammaNormResult res = gamma_norm(op, 100'000, 11);
    const double expected = std::sqrt(0.5) * 5.0;
    const double rel = std::abs(res.estimate / expected - 1.0);
    add(rep, "indicator_gamma_norm", res.estimate, expected, rel <= 0.02);
    add_le(rep, "indicator_exact_error", std::abs(res.exact - expected), 1e-12);

    // Two orthonormal functions with orthogonal vectors.
    const std::size_t n = 1000;
    const Eigen::VectorXd x = FiniteRankOperator::uniform_nodes(0.0, 1.0, n);
    Eigen::VectorXd h1 = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    Eigen::VectorXd h2 = (2.0 * std::numbers::pi * x.array()).cos().matrix() * std::sqrt(2.0);
    StateVector e1(2), e2(2);
    e1 << 1.0, 0.0;
    e2 << 0.0, 2.0;
    const auto two = FiniteRankOperator::on_uniform_grid(0.0, 1.0, n, {{h1, e1}, {h2, e2}});
    const GammaNormResult r2 = gamma_norm(two, 100'000, 12);
    add_le(rep, "two_term_exact_error", std::abs(r2.exact - std::sqrt(5.0)), 1e-9);
    add_le(rep, "two_term_mc_error_over_se", std::abs(r2.estimate - r2.exact) / r2.standard_error, 3.0);

    const TimeGrid grid(1.0, 200);
    Eigen::MatrixXd f(2, static_cast<Eigen::Index>(grid.nodes()));
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const double t = grid.time(k);
        f.col(static_cast<Eigen::Index>(k)) << std::sin(3.0 * t), t * t;
    }
    double l2 = 0.0;
    for (std::size_t k = 0; k < grid.steps(); ++k) l2 += grid.dt() * f.col(static_cast<Eigen::Index>(k)).squaredNorm();
    l2 = std::sqrt(l2);
    double worst_kw = 0.0;
    for (std::size_t i = 0; i < grid.steps(); i += 20) {
        for (std::size_t j = i + 10; j <= grid.steps(); j += 30) {
            const double s = grid.time(i), t = grid.time(j);
            worst_kw = std::max(worst_kw, kw_integral(grid, f, s, t).norm() / (std::sqrt(t - s) * l2));
        }
    }
    add_le(rep, "kw_norm_bound_ratio", worst_kw, 1.0 + 1.0 / static_cast<double>(grid.steps()));
    Eigen::MatrixXd b(2, 2);
    b << 0.3, -1.2, 2.0, 0.7;
    const auto [lhs, rhs] = bounded_operator_pushthrough(b, grid, f, 0.25, 0.75);
    add_le(rep, "pushthrough_gap", (lhs - rhs).norm(), 1e-12);
    return rep;
}

ProcessEnsemble integrand(const BrownianEnsemble& bm, const std::function<double(double, double)>& fn) {
    ProcessEnsemble phi(bm.grid(), bm.paths(), 1);
    for (std::size_t k = 0; k < bm.grid().nodes(); ++k) {
        const auto w = bm.values(k);
        auto s = phi.slice(k);
        for (std::size_t m = 0; m < bm.paths(); ++m) s(0, static_cast<Eigen::Index>(m)) = fn(bm.grid().time(k), w[m]);
    }
    return phi;
}

SuiteReport ito_suite() {
    SuiteReport rep{"ito", {}};
    const BrownianEnsemble bm = simulate_brownian(TimeGrid(1.0, 50), 50'000, 31);
    const std::vector<std::pair<std::string, std::function<double(double, double)>>> cases{
        {"constant", [](double, double) { return 1.0; }},
        {"brownian", [](double, double w) { return w; }},
        {"sign_brownian", [](double, double w) { return w >= 0.0 ? 1.0 : -1.0; }},
    };
    for (const auto& [name, fn] : cases) {
        const auto report = ito_isomorphism_report(integrand(bm, fn), bm, 2.0);
        add(rep, "p2_ratio_" + name, report.ratio, 1.0, std::abs(report.ratio - 1.0) <= 3.0 * report.standard_error);
    }
    for (double p : {1.5, 3.0}) {
        const auto report = ito_isomorphism_report(integrand(bm, cases[1].second), bm, p);
        add(rep, "ratio_p" + std::to_string(p).substr(0, 3) + "_brownian", report.ratio, 0.0,
            std::isfinite(report.ratio) && report.ratio > 0.0);
    }
    return rep;
}

SuiteReport representation_suite() {
    SuiteReport rep{"representation", {}};
    const std::size_t paths = 20'000;
    const BrownianEnsemble bm = simulate_brownian(TimeGrid(1.0, 20), paths, 41);
    const RegressionCache regs(bm, 2);

    const ProcessEnsemble g = integrand(bm, [](double, double w) { return w; });
    const MartingaleRepresentation linear = martingale_representation(g, bm, regs);
    const double worst_residual = *std::max_element(linear.residual.begin(), linear.residual.end());
    add_le(rep, "linear_residual_max", worst_residual, 3.0 / std::sqrt(static_cast<double>(paths)));
    double worst_tau = 0.0;
    for (std::size_t u = 1; u <= bm.grid().steps(); ++u) {
        for (std::size_t s = 0; s < u; ++s) {
            worst_tau = std::max(worst_tau, (linear.kernel.at(u, s).array() - 1.0).abs().maxCoeff());
        }
    }
    add_le(rep, "linear_kernel_max_error", worst_tau, 1e-6);

    const ProcessEnsemble g2 = integrand(bm, [](double, double w) { return w * w; });
    const MartingaleRepresentation quad = martingale_representation(g2, bm, regs);
    const std::size_t u = bm.grid().steps();
    double worst_rel = 0.0;
    for (std::size_t s = 1; s < u; ++s) {
        const auto w = bm.values(s);
        const Eigen::Map<const Eigen::RowVectorXd> wr(w.data(), static_cast<Eigen::Index>(w.size()));
        const double err = std::sqrt((quad.kernel.at(u, s) - 2.0 * wr).squaredNorm() / static_cast<double>(paths));
        const double scale = std::sqrt((2.0 * wr).squaredNorm() / static_cast<double>(paths));
        worst_rel = std::max(worst_rel, err / scale);
    }
    add_le(rep, "quadratic_kernel_relative_error", worst_rel, 0.05);
    return rep;
}

}  // namespace

SuiteReport run_validation(const std::string& suite) {
    if (suite == "geometry") return geometry_suite();
    if (suite == "gamma") return gamma_suite();
    if (suite == "ito") return ito_suite();
    if (suite == "representation") return representation_suite();
    throw InputError("unknown validation suite '" + suite + "' (expected geometry, gamma, ito or representation)");
}

}  // namespace bsei
