#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridfc {

/// Shortest decimal string that parses back to exactly the same double.
/// Locale-independent; NaN renders as "nan", infinities as "inf"/"-inf".
inline std::string format_double(double value) {
  char buffer[32];
  const std::to_chars_result result =
      std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

/// Strict full-token double parse; throws std::invalid_argument on anything
/// but a complete numeric token (including the "nan"/"inf" spellings above).
inline double parse_double(std::string_view token) {
  double value = 0.0;
  const std::from_chars_result result =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc{} || result.ptr != token.data() + token.size()) {
    throw std::invalid_argument("not a number: " + std::string(token));
  }
  return value;
}

/// Strict full-token integer parse.
inline int parse_int(std::string_view token) {
  int value = 0;
  const std::from_chars_result result =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc{} || result.ptr != token.data() + token.size()) {
    throw std::invalid_argument("not an integer: " + std::string(token));
  }
  return value;
}

}  // namespace gridfc
