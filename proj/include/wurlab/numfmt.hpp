#pragma once

#include <string>
#include <string_view>

namespace wurlab {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parses; return false on trailing garbage or overflow.
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, long long& out);

}  // namespace wurlab
