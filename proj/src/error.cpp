#include "tamed/error.hpp"

namespace tamed {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NegativeSpectrum: return "NegativeSpectrum";
        case ErrorKind::NonDividingFactor: return "NonDividingFactor";
        case ErrorKind::QuadratureNonConvergence: return "QuadratureNonConvergence";
        case ErrorKind::PositiveRegularity: return "PositiveRegularity";
        case ErrorKind::StepTooLarge: return "StepTooLarge";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::NonFiniteState: return "NonFiniteState";
        case ErrorKind::UncoupledRuns: return "UncoupledRuns";
        case ErrorKind::MomentOverflow: return "MomentOverflow";
        case ErrorKind::DegenerateDesign: return "DegenerateDesign";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

}  // namespace tamed
