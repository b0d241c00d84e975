// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace groundloop
{

enum class ErrorKind
{
    InvalidDims,
    DegenerateGeometry,
    InvalidStats,
    NonphysicalState,
    UndefinedFractionalFlow,
    InvalidWell,
    ConvergenceFailure,
    LinearSolverFailure,
    OutOfRange,
    Parse,
    Unit,
    Level,
    Contradiction,
    InvariantViolation,
    StaleLedger,
    Query,
    NotFound,
    Tamper,
    CorruptLog,
    RefusedDiff,
    Conflict,
    Io,
};

/// Stable machine-readable code, e.g. "invalid-dims".
const char* errorCode(ErrorKind kind) noexcept;

/// Every domain failure in the library is reported through this type.
class Error: public std::runtime_error
{
  public:
    Error(ErrorKind kind, std::string message, std::string detail = {});

    [[nodiscard]] ErrorKind kind() const noexcept { return _kind; }
    [[nodiscard]] const char* code() const noexcept { return errorCode(_kind); }
    /// Extra context: offending field, invariant name, JSON location...
    [[nodiscard]] const std::string& detail() const noexcept { return _detail; }

  private:
    ErrorKind _kind;
    std::string _detail;
};

} // namespace groundloop
