#pragma once

#include "bsei/config.hpp"
#include "bsei/solver.hpp"

#include <json.hpp>

#include <string>

namespace bsei {

/// Full-precision decimal text of a double ("%.17g").
std::string format_double(double v);

/// window_index,iteration,dY_norm,dZ_norm,dg_norm,ratio,eps_n with LF endings.
std::string convergence_csv(const SolveReport& report);

/// Machine-readable summary: schedule, per-window diagnostics, residuals,
/// runtime and seed.
nlohmann::json summary_json(const SolveReport& report, const std::string& status);

/// Per-node ensemble means of Y, Z, g and the equation residual.
std::string plot_data_csv(const Solution& sol, const ResidualReport* residuals);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace bsei
