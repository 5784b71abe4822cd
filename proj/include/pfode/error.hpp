#pragma once

#include <stdexcept>
#include <string>

namespace pfode {

/// Error categories surfaced to the command line as distinct exit codes.
enum class ErrorCategory { config = 2, io = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Numeric failures: domain violations, degenerate statistics, singular systems.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct DimensionError : NumericError {
    explicit DimensionError(const std::string& what) : NumericError("dimension: " + what) {}
};

struct DomainError : NumericError {
    explicit DomainError(const std::string& what) : NumericError("domain: " + what) {}
};

struct IndexError : NumericError {
    explicit IndexError(const std::string& what) : NumericError("index: " + what) {}
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace pfode
