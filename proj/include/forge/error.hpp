#pragma once

#include <stdexcept>
#include <string>

namespace forge {

enum class ErrorKind {
    Io,          // unreadable or missing input
    Parse,       // malformed input document
    Validation,  // domain invariant violated
    Infeasible,  // no valid draw exists (e.g. sequence too short)
    Config,      // bad configuration
    External,    // external service failure, retriable
    Empty,       // pipeline produced nothing
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Config: return "config";
        case ErrorKind::External: return "external";
        case ErrorKind::Empty: return "empty";
    }
    return "unknown";
}

}  // namespace forge
