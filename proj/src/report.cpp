#include "bsei/report.hpp"

#include "bsei/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace bsei {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string convergence_csv(const SolveReport& report) {
    std::string out = "window_index,iteration,dY_norm,dZ_norm,dg_norm,ratio,eps_n\n";
    for (const auto& w : report.windows) {
        for (const auto& it : w.iterations) {
            out += std::to_string(it.window) + "," + std::to_string(it.iteration) + "," + format_double(it.dy) + "," +
                   format_double(it.dz) + "," + format_double(it.dg) + "," +
                   (it.ratio ? format_double(*it.ratio) : std::string()) + "," + format_double(it.eps) + "\n";
        }
    }
    return out;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summary_json(const SolveReport& report, const std::string& status) {
    const auto& s = report.schedule;
    json j;
    j["status"] = status;
    j["schedule"] = {{"gamma_S", s.gamma_s},   {"c_pE", s.c_pe},         {"L", s.lipschitz},
                     {"beta", s.beta},         {"delta", s.delta},       {"margin", s.margin()},
                     {"windows", s.windows},   {"window_length", s.window_length},
                     {"n_max", s.n_max},       {"tol", s.tol}};
    j["grid"] = {{"steps", report.steps}, {"paths", report.paths}};
    j["seed"] = report.seed;
    j["runtime_seconds"] = report.runtime_seconds;
    j["ridge_steps"] = report.ridge_steps;
    json windows = json::array();
    for (const auto& w : report.windows) {
        windows.push_back({{"window_index", w.index},
                           {"first_node", w.first},
                           {"last_node", w.last},
                           {"converged", w.converged},
                           {"iterations", w.iterations.size()},
                           {"fitted_ratio", number_or_null(w.fitted_ratio())}});
    }
    j["windows"] = windows;
    if (report.residuals) {
        const auto& r = *report.residuals;
        j["residuals"] = {{"inclusion_max", r.inclusion_max},
                          {"equation_max", r.equation_max},
                          {"equation_l2_max", r.equation_l2_max},
                          {"equation", r.equation},
                          {"z_crosscheck", r.z_crosscheck},
                          {"z_norm", r.z_norm},
                          {"continuity_modulus", r.continuity_modulus}};
    } else {
        j["residuals"] = nullptr;
    }
    return j;
}

std::string plot_data_csv(const Solution& sol, const ResidualReport* residuals) {
    const auto d = static_cast<Eigen::Index>(sol.y.dim());
    std::string out = "k,t";
    for (const char* name : {"y_mean", "y_sd", "z_mean", "g_mean"}) {
        for (Eigen::Index i = 0; i < d; ++i) out += std::string(",") + name + "_" + std::to_string(i);
    }
    out += ",equation_residual\n";
    const TimeGrid& grid = sol.y.grid();
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const Eigen::VectorXd y_mean = sol.y.slice(k).rowwise().mean();
        const Eigen::VectorXd y_sd =
            ((sol.y.slice(k).colwise() - y_mean).array().square().rowwise().mean()).sqrt().matrix();
        const Eigen::VectorXd z_mean = sol.z.slice(k).rowwise().mean();
        const Eigen::VectorXd g_mean = sol.g.slice(k).rowwise().mean();
        out += std::to_string(k) + "," + format_double(grid.time(k));
        for (const Eigen::VectorXd* v : {&y_mean, &y_sd, &z_mean, &g_mean}) {
            for (Eigen::Index i = 0; i < d; ++i) out += "," + format_double((*v)[i]);
        }
        out += ",";
        if (residuals) out += format_double(residuals->equation[k]);
        out += "\n";
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << content;
    if (!f) throw InputError("failed writing '" + path + "'");
}

}  // namespace bsei
