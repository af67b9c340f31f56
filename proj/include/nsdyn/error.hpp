#ifndef NSDYN_ERROR_HPP
#define NSDYN_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace nsdyn {

enum class ErrorCode {
    invalid_argument,
    root_finding_failed,
    solver_failed,
    undecidable,
    no_convergence,
    residual_too_large,
    no_near_return,
    newton_escaped,
    transition_not_found,
    insufficient_tail,
    degenerate_member,
    continuation_failed,
    jacobian_singular,
    no_roots,
    unsupported_format,
    exact_period_failure,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::root_finding_failed: return "RootFindingFailed";
    case ErrorCode::solver_failed: return "SolverFailed";
    case ErrorCode::undecidable: return "Undecidable";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::residual_too_large: return "ResidualTooLarge";
    case ErrorCode::no_near_return: return "NoNearReturn";
    case ErrorCode::newton_escaped: return "NewtonEscaped";
    case ErrorCode::transition_not_found: return "TransitionNotFound";
    case ErrorCode::insufficient_tail: return "InsufficientTail";
    case ErrorCode::degenerate_member: return "DegenerateMember";
    case ErrorCode::continuation_failed: return "ContinuationFailed";
    case ErrorCode::jacobian_singular: return "JacobianSingular";
    case ErrorCode::no_roots: return "NoRoots";
    case ErrorCode::unsupported_format: return "UnsupportedFormat";
    case ErrorCode::exact_period_failure: return "ExactPeriodFailure";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code; every failure in the library is one of these.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        fail(ErrorCode::invalid_argument, message);
}

} // namespace nsdyn

#endif
