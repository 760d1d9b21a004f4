#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nilpath {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands disagree in dimension or depth.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation
/// (e.g. log of a tensor whose scalar part is not 1).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Time grid unsuitable for the requested operation.
class GridError : public Error {
public:
    using Error::Error;
};

/// Covariance model is invalid (asymmetric, not positive semidefinite, ...).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A configured size exceeds a hard resource cap.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Malformed input text. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Experiment configuration names an unsupported kind.
class UnknownKindError : public Error {
public:
    using Error::Error;
};

} // namespace nilpath
