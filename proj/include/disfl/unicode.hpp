#pragma once

#include <string>
#include <string_view>

namespace disfl::unicode {

/// Number of code points in a UTF-8 string (invalid bytes count as one each).
std::size_t length(std::string_view utf8);

/// First `n` code points of `utf8`.
std::string prefix(std::string_view utf8, std::size_t n);

bool contains_whitespace(std::string_view utf8);

bool is_valid_utf8(std::string_view utf8);

}  // namespace disfl::unicode
