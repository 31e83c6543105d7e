#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochsym {

// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (empty index, bad weak order, h <= 0 ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed expression or configuration text. `position` is a 0-based offset
// into the offending string, or npos when it does not apply.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position = std::string::npos)
        : Error(position == std::string::npos ? what : what + " at position " + std::to_string(position)),
          position_(position)
    {
    }
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Invalid configuration file: missing keys, bad values, unknown sections.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Evaluation failures: unbound symbols, division by zero, overflow, NaN states,
// solver non-convergence.
class NumericError : public Error {
public:
    using Error::Error;
};

// A size or cost guard was hit (series length, oracle budget, shuffle length).
class CapExceeded : public Error {
public:
    using Error::Error;
};

// The system lies outside the class a derivation supports (e.g. fully
// multiplicative noise for modified equations).
class UnsupportedSystem : public Error {
public:
    using Error::Error;
};

} // namespace stochsym
