#pragma once

#include <string>
#include <string_view>

namespace chua {

/// Shortest decimal text that parses back to exactly `value`.
[[nodiscard]] std::string format_number(double value);

/// Strict decimal parse of a whole field; throws DomainError on garbage.
[[nodiscard]] double parse_number(std::string_view text);

}  // namespace chua
