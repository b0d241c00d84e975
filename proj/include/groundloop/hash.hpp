// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>

namespace groundloop
{

/// Lowercase hex SHA-256 of a byte string.
std::string sha256Hex(std::string_view bytes);

/// SHA-256 over the raw IEEE-754 bytes of a value array (little-endian host assumed).
std::string sha256Hex(std::span<const double> values);

} // namespace groundloop
