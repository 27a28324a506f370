#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace deepbsde {

/// Invalid or inconsistent configuration (bad shapes, unknown ids, malformed
/// config files). Maps to process exit code 1 in the CLI.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure during computation (non-finite values, divergence).
/// Maps to process exit code 2 in the CLI.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Formats a double with 17 significant digits, enough to round-trip the
/// exact binary value. Used everywhere results are serialized so that files
/// are byte-identical across runs with the same seed.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace deepbsde
