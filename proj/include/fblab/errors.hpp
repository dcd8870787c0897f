#pragma once

#include <stdexcept>
#include <string>

namespace fblab {

/// Broad failure class; the CLI maps each to an exit code.
enum class ErrorKind {
    Input,      ///< malformed scenario, bad arguments, violated preconditions
    Numerical,  ///< CFL, divergence, non-convergence, singular systems
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t position)
        : Error(ErrorKind::Input, msg + " at position " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(ErrorKind::Numerical, msg) {}
};

class CflViolation : public Error {
public:
    explicit CflViolation(const std::string& msg) : Error(ErrorKind::Numerical, msg) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, long time_node)
        : Error(ErrorKind::Numerical, msg), time_node_(time_node) {}
    long time_node() const noexcept { return time_node_; }

private:
    long time_node_;
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& msg) : Error(ErrorKind::Numerical, msg) {}
};

class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& msg) : Error(ErrorKind::Input, msg) {}
};

inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error numerical_error(const std::string& msg) { return Error(ErrorKind::Numerical, msg); }

}  // namespace fblab
