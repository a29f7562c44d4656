#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vfi {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// Impulse schedule malformed or incompatible with the horizon.
struct InvalidSchedule : Error {
    explicit InvalidSchedule(const std::string& msg) : Error(msg) {}
};

/// Two trajectories (or a node query) do not live on the same grid.
struct GridMismatch : Error {
    explicit GridMismatch(const std::string& msg) : Error(msg) {}
};

/// Expression-text parse failure; `position` is a 0-based character offset.
struct SyntaxError : Error {
    SyntaxError(std::size_t position, const std::string& msg)
        : Error(msg + " (at offset " + std::to_string(position) + ")"),
          position(position) {}
    std::size_t position;
};

struct UnknownVariable : SyntaxError {
    UnknownVariable(std::size_t position, const std::string& name)
        : SyntaxError(position, "unknown variable '" + name + "'") {}
};

struct IndexOutOfRange : SyntaxError {
    IndexOutOfRange(std::size_t position, const std::string& what)
        : SyntaxError(position, "component index out of range: " + what) {}
};

/// Evaluation touched a variable the environment does not bind.
struct UnboundVariable : Error {
    explicit UnboundVariable(const std::string& name)
        : Error("unbound variable '" + name + "'") {}
};

/// Non-finite result (NaN/Inf, log of nonpositive, division by zero, ...).
struct EvalError : Error {
    explicit EvalError(const std::string& msg) : Error(msg) {}
};

/// Kernel evaluator failed; carries the offending (tau, sigma) pair.
struct KernelEvalError : Error {
    KernelEvalError(double tau, double sigma, const std::string& msg)
        : Error("kernel evaluation failed at (tau=" + std::to_string(tau) +
                ", sigma=" + std::to_string(sigma) + "): " + msg),
          tau(tau), sigma(sigma) {}
    double tau;
    double sigma;
};

/// Problem/instance file diagnostics, annotated with section and field names.
struct FileFormatError : Error {
    FileFormatError(const std::string& section, const std::string& field,
                    const std::string& msg)
        : Error("[" + section + "] " + (field.empty() ? "" : field + ": ") + msg),
          section(section), field(field) {}
    std::string section;
    std::string field;
};

/// A finite-difference stencil needs more nodes than the panel provides.
struct InsufficientResolution : Error {
    explicit InsufficientResolution(const std::string& msg) : Error(msg) {}
};

/// A bound that requires a contraction (L_R < 1) was asked without one.
struct CertificateInfeasible : Error {
    explicit CertificateInfeasible(const std::string& msg) : Error(msg) {}
};

/// Equality-oracle fixed point failed to contract on the given grid.
struct OracleDivergence : Error {
    explicit OracleDivergence(const std::string& msg) : Error(msg) {}
};

/// Gronwall instance data violates nonnegativity/monotonicity hypotheses.
struct InstanceValidationError : Error {
    explicit InstanceValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace vfi
