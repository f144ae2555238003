#pragma once

#include <string>
#include <string_view>

namespace rtirl {

/// Locale-independent "%.17g" formatting; parse_double(format_double(v)) == v.
std::string format_double(double v);

/// Throws std::invalid_argument on trailing garbage or empty input.
double parse_double(std::string_view text);

}  // namespace rtirl
