#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace timgen {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict parse of a complete decimal number. Throws ParseError(0, ...) otherwise.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

/// Comma-separated doubles.
std::vector<double> parse_double_list(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace timgen
