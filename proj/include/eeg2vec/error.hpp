#pragma once

#include <stdexcept>
#include <string>

namespace eeg2vec {

/// Failure category; the CLI maps each one to a distinct exit code.
enum class ErrorKind {
    usage,
    config,
    io,
    format,
    shape,
    precondition,
    numeric,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::shape: return "shape";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

inline int exit_code(ErrorKind kind) {
    return 2 + static_cast<int>(kind);
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace eeg2vec
