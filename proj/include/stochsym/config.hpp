#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "stochsym/integrator.hpp"
#include "stochsym/system.hpp"

namespace stochsym {

/// A system definition file:
///
///   [system]       name, d, m
///   [parameters]   name = value
///   [hamiltonians] H0 = "expr" ... Hm = "expr"
///   [initial]      p = ..., q = ... (or p1.., q1..)
///   [defaults]     h, T, samples, seed
///
/// '#' starts a comment. Expression strings may be quoted.
struct SystemConfig {
    std::string name;
    HamiltonianSystem system;
    PhasePoint initial;
    double h = 0.1;
    double T = 1.0;
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
};

/// Throws ConfigError for structural problems and ParseError (with the key in
/// the message) for malformed expressions.
SystemConfig parse_config(std::string_view text);
SystemConfig load_config(const std::string& path);

} // namespace stochsym
