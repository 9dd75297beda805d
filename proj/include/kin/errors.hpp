#pragma once
#include <stdexcept>
#include <string>

namespace kin {

enum class ErrorKind {
    InvalidInput,
    OutOfDomain,
    Singular,
    OnJumpSurface,
    UnsupportedOrder,
    NotPrepared,
    InconsistentState,
    InsufficientHistory,
    NonConvergence,
    Config,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    // Exit code used by the command-line front end.
    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Config:
            case ErrorKind::InvalidInput: return 2;
            default: return 3;
        }
    }

private:
    ErrorKind kind_;
};

}  // namespace kin
