#pragma once

#include "bsei/gamma.hpp"
#include "bsei/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace bsei {

inline constexpr int kConfigSchema = 1;

struct Thresholds {
    double inclusion = 1e-8;
    double equation = 0.05;
};

struct OutputPaths {
    std::string report_path = "report.json";
    std::string convergence_csv_path = "convergence.csv";
    bool emit_plot_data = false;
    std::string plot_data_path = "plot_data.csv";
};

struct RunConfig {
    BSEIProblem problem;
    SolverOptions numerics;
    Thresholds thresholds;
    OutputPaths outputs;
};

/// Strict parse of a run configuration. Unknown keys, missing required keys
/// and out-of-range values raise InputError naming the field.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

struct GammaNormRequest {
    FiniteRankOperator op;
    std::size_t n_gauss = 100'000;
    std::uint64_t seed = 1;
};

GammaNormRequest parse_gamma_request(const std::string& text);
GammaNormRequest load_gamma_request(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace bsei
