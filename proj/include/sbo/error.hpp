#pragma once

#include <stdexcept>
#include <string>

namespace sbo {

enum class ErrorKind {
    InvalidDomain,
    NonManifold,
    DegenerateElement,
    Dimension,
    SpectralFailure,
    InvalidField,
    SingularExponent,
    Solver,
    Config,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for all library failures. The kind selects the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Eigensolver did not reach the residual tolerance.
class SpectralError : public Error {
public:
    SpectralError(const std::string& message, double residual)
        : Error(ErrorKind::SpectralFailure, message), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        throw Error(kind, message);
    }
}

} // namespace sbo
