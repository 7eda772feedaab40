#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace bsei {

struct ValidationCheck {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::string suite;
    std::vector<ValidationCheck> checks;

    bool passed() const;
    nlohmann::json to_json() const;
};

/// geometry, gamma, ito, representation
const std::vector<std::string>& validation_suites();

/// Runs one invariant suite with fixed seeds. Unknown names raise InputError.
SuiteReport run_validation(const std::string& suite);

}  // namespace bsei
