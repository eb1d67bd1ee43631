#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plcont {

// Broad failure class; the CLI maps each onto a process exit code.
enum class ErrorCategory {
    configuration,  // exit 2
    data,           // exit 3
    numerical,      // exit 4
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::configuration, what) {}
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line = 0)
        : Error(ErrorCategory::data,
                line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

/// A song lacks the raw data needed to build some feature kind.
class MissingFeatureError : public Error {
public:
    explicit MissingFeatureError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

inline int exit_code(ErrorCategory category) noexcept {
    switch (category) {
    case ErrorCategory::configuration: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numerical: return 4;
    }
    return 1;
}

}  // namespace plcont
