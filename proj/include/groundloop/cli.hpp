// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace groundloop::cli
{

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

/// Runs one command line. Results go to `out`; errors go to `err` as a JSON
/// object {code, message, detail}.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace groundloop::cli
