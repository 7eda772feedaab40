#include "bsei/config.hpp"
#include "bsei/error.hpp"
#include "bsei/gamma.hpp"
#include "bsei/parallel.hpp"
#include "bsei/report.hpp"
#include "bsei/solver.hpp"
#include "bsei/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

int run_solve(const std::string& config_path) {
    const bsei::RunConfig cfg = bsei::load_run_config(config_path);
    try {
        bsei::SolveResult result = bsei::solve(cfg.problem, cfg.numerics);
        const auto& r = *result.report.residuals;
        const bool inclusion_ok = r.inclusion_max <= cfg.thresholds.inclusion;
        const bool equation_ok = r.equation_max <= cfg.thresholds.equation;
        const std::string status = inclusion_ok && equation_ok ? "ok" : "residual_above_threshold";

        bsei::write_text_file(cfg.outputs.convergence_csv_path, bsei::convergence_csv(result.report));
        nlohmann::json summary = bsei::summary_json(result.report, status);
        summary["thresholds"] = {{"inclusion", cfg.thresholds.inclusion}, {"equation", cfg.thresholds.equation}};
        bsei::write_text_file(cfg.outputs.report_path, summary.dump(2) + "\n");
        if (cfg.outputs.emit_plot_data) {
            bsei::write_text_file(cfg.outputs.plot_data_path, bsei::plot_data_csv(result.solution, &r));
        }

        std::cout << "schedule: beta=" << result.report.schedule.beta << " delta=" << result.report.schedule.delta
                  << " windows=" << result.report.schedule.windows << "\n"
                  << "inclusion residual: " << r.inclusion_max << "\n"
                  << "equation residual (max over grid): " << r.equation_max << "\n"
                  << "status: " << status << "\n";
        return status == "ok" ? kExitOk : kExitNumeric;
    } catch (const bsei::NonConvergenceError& e) {
        bsei::write_text_file(cfg.outputs.convergence_csv_path, bsei::convergence_csv(e.partial()));
        bsei::write_text_file(cfg.outputs.report_path,
                              bsei::summary_json(e.partial(), "not_converged").dump(2) + "\n");
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

int run_validate(const std::string& suite) {
    const bsei::SuiteReport rep = bsei::run_validation(suite);
    std::cout << rep.to_json().dump(2) << "\n";
    return rep.passed() ? kExitOk : kExitNumeric;
}

int run_gamma_norm(const std::string& path) {
    const bsei::GammaNormRequest req = bsei::load_gamma_request(path);
    const bsei::GammaNormResult res = bsei::gamma_norm(req.op, req.n_gauss, req.seed);
    const nlohmann::json out{{"estimate", res.estimate},
                             {"exact", res.exact},
                             {"standard_error", res.standard_error},
                             {"rank", res.rank},
                             {"dependent_terms", res.dependent_terms},
                             {"n_gauss", req.n_gauss},
                             {"seed", req.seed}};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    bsei::configure_threads_from_env();

    CLI::App app{"Backward stochastic evolution inclusion solver"};
    app.require_subcommand(1);

    std::string config_path;
    auto* solve = app.add_subcommand("solve", "Solve the problem described by a JSON run configuration");
    solve->add_option("config", config_path, "Run configuration (JSON)")->required();

    std::string suite;
    auto* validate = app.add_subcommand("validate", "Run an invariant suite: geometry, gamma, ito, representation");
    validate->add_option("suite", suite, "Suite name")->required();

    std::string operator_path;
    auto* gamma = app.add_subcommand("gamma-norm", "Gamma-norm of a finite-rank operator given as JSON");
    gamma->add_option("operator", operator_path, "Operator description (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (solve->parsed()) return run_solve(config_path);
        if (validate->parsed()) return run_validate(suite);
        if (gamma->parsed()) return run_gamma_norm(operator_path);
    } catch (const bsei::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const bsei::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitInput;
}
