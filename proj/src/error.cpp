#include "bvlab/error.hpp"

namespace bvlab {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::ConstructionFailed: return "ConstructionFailed";
        case ErrorCode::BlowUp: return "BlowUp";
        case ErrorCode::StepUnderflow: return "StepUnderflow";
        case ErrorCode::MissingVelocities: return "MissingVelocities";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::DidNotConverge: return "DidNotConverge";
        case ErrorCode::Escaped: return "Escaped";
        case ErrorCode::NoSettle: return "NoSettle";
        case ErrorCode::NotDescent: return "NotDescent";
        case ErrorCode::NotAnEquilibrium: return "NotAnEquilibrium";
        case ErrorCode::ChainStuck: return "ChainStuck";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::LedgerViolation: return "LedgerViolation";
    }
    return "Unknown";
}

}  // namespace bvlab
