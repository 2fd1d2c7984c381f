#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

#include "vsgmn/errors.hpp"

namespace vsgmn {

// Shortest decimal form that parses back to exactly the same double. Used
// for all persisted numeric text so save -> load round-trips bit-exactly.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// Human-facing formatting with six significant digits.
inline std::string format_sig6(double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return std::string(buf);
}

// Strict double parser; `where` names file:line for the error message.
inline double parse_double(std::string_view text, const std::string& where) {
  double out = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError(where + ": cannot parse '" + std::string(text) +
                     "' as a number");
  }
  return out;
}

inline long long parse_int(std::string_view text, const std::string& where) {
  long long out = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError(where + ": cannot parse '" + std::string(text) +
                     "' as an integer");
  }
  return out;
}

}  // namespace vsgmn
