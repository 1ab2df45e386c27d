#ifndef GROCE_ERRORS_HPP
#define GROCE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace groce {

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
    parse,
    validation,
    io,
    format,
    resolution,
    integrity,
    convergence,
    capacity,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class IoError : public Error {
public:
    IoError(const std::string& what, std::string path)
        : Error(ErrorKind::io, what + ": " + path), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(ErrorKind::resolution, what) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& what) : Error(ErrorKind::integrity, what) {}
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error(ErrorKind::convergence, what) {}
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(ErrorKind::capacity, what) {}
};

}  // namespace groce

#endif  // GROCE_ERRORS_HPP
