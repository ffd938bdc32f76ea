// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace dipgs::io {

/// Exact text form of a finite double, e.g. "0x1.8p+1" or "-0x1p-3".
std::string to_hexfloat(double value);
/// Inverse of to_hexfloat; throws std::invalid_argument on anything else.
double from_hexfloat(std::string_view text);

}  // namespace dipgs::io
