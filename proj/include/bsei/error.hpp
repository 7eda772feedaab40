#pragma once

#include <stdexcept>
#include <string>

namespace bsei {

/// Malformed or out-of-range caller input (dimension mismatch, off-grid time, bad config).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated structural contract between modules, e.g. a non-adapted integrand.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace bsei
