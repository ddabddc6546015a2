#pragma once

#include <string>
#include <string_view>

namespace sit {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Strict parse of a full string as double; throws ConfigError otherwise.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

} // namespace sit
