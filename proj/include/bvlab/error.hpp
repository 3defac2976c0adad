#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bvlab {

enum class ErrorCode {
    NotSymmetric,
    NotPositiveDefinite,
    DimensionMismatch,
    NoConvergence,
    OutOfRange,
    ConstructionFailed,
    BlowUp,
    StepUnderflow,
    MissingVelocities,
    TooFewPoints,
    DidNotConverge,
    Escaped,
    NoSettle,
    NotDescent,
    NotAnEquilibrium,
    ChainStuck,
    ConfigError,
    LedgerViolation,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bvlab
