#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tamed {

enum class ErrorKind {
    InvalidArgument,
    NegativeSpectrum,
    NonDividingFactor,
    QuadratureNonConvergence,
    PositiveRegularity,
    StepTooLarge,
    GridMismatch,
    NonFiniteState,
    UncoupledRuns,
    MomentOverflow,
    DegenerateDesign,
    IoFailure,
    ParseError,
    ValidationError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace tamed
