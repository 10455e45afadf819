#include "disfl/unicode.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>

namespace disfl::unicode {

namespace {

template <class Fn>
void for_each_code_point(std::string_view s, Fn&& fn) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    const std::int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, len, c);
    if (!fn(c, start, i)) return;
  }
}

}  // namespace

std::size_t length(std::string_view utf8) {
  std::size_t n = 0;
  for_each_code_point(utf8, [&](UChar32, std::int32_t, std::int32_t) {
    ++n;
    return true;
  });
  return n;
}

std::string prefix(std::string_view utf8, std::size_t n) {
  std::size_t end = 0;
  std::size_t seen = 0;
  for_each_code_point(utf8, [&](UChar32, std::int32_t, std::int32_t next) {
    if (seen == n) return false;
    ++seen;
    end = static_cast<std::size_t>(next);
    return true;
  });
  return std::string(utf8.substr(0, end));
}

bool contains_whitespace(std::string_view utf8) {
  bool found = false;
  for_each_code_point(utf8, [&](UChar32 c, std::int32_t, std::int32_t) {
    if (c >= 0 && u_isUWhiteSpace(c)) found = true;
    return !found;
  });
  return found;
}

bool is_valid_utf8(std::string_view utf8) {
  bool ok = true;
  for_each_code_point(utf8, [&](UChar32 c, std::int32_t, std::int32_t) {
    if (c < 0) ok = false;
    return ok;
  });
  return ok;
}

}  // namespace disfl::unicode
