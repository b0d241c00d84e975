// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>

namespace groundloop
{

const char* errorCode(ErrorKind kind) noexcept
{
    switch (kind)
    {
        case ErrorKind::InvalidDims: return "invalid-dims";
        case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
        case ErrorKind::InvalidStats: return "invalid-stats";
        case ErrorKind::NonphysicalState: return "nonphysical-state";
        case ErrorKind::UndefinedFractionalFlow: return "undefined-fractional-flow";
        case ErrorKind::InvalidWell: return "invalid-well";
        case ErrorKind::ConvergenceFailure: return "convergence-failure";
        case ErrorKind::LinearSolverFailure: return "linear-solver-failure";
        case ErrorKind::OutOfRange: return "out-of-range";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Unit: return "unit-error";
        case ErrorKind::Level: return "level-error";
        case ErrorKind::Contradiction: return "contradiction";
        case ErrorKind::InvariantViolation: return "invariant-violation";
        case ErrorKind::StaleLedger: return "stale-ledger";
        case ErrorKind::Query: return "query-error";
        case ErrorKind::NotFound: return "not-found";
        case ErrorKind::Tamper: return "tamper";
        case ErrorKind::CorruptLog: return "corrupt-log";
        case ErrorKind::RefusedDiff: return "refused-diff";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Io: return "io-error";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, std::string message, std::string detail):
    std::runtime_error(std::move(message)), _kind(kind), _detail(std::move(detail))
{
}

} // namespace groundloop
