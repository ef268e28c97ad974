// Shared error types and small helpers used across the library.
#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace mmbal {

// Invalid configuration: mismatched dimensions, bad hyper-parameters,
// malformed config/checkpoint files.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken runtime contract: stale caches, non-finite values where the
// caller guaranteed finiteness.
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
    if (!ok) throw contract_error(msg);
}

// Non-fatal diagnostics go to stderr so they never pollute CSV/JSON output.
inline void warn(const std::string& msg) {
    std::fprintf(stderr, "[mmbal] warning: %s\n", msg.c_str());
}

// Relative error with a guard against near-zero denominators.
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace mmbal
