#pragma once

#include <string>
#include <string_view>

namespace pho {

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

// Strict parse of a full field; returns false on any trailing garbage,
// empty input or non-finite result.
bool parse_double(std::string_view text, double& out);

}  // namespace pho
