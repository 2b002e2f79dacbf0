#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include "edgeadapt/errors.hpp"

namespace edgeadapt {

// Formats a double with 17 significant digits, enough for an exact
// decimal -> binary64 round trip. All file formats use this.
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_real(std::string_view s, std::string_view what = "real") {
  std::string t(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || t.empty()) {
    throw ParseError("invalid " + std::string(what) + ": '" + t + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view s,
                               std::string_view what = "integer") {
  std::string t(s);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || t.empty()) {
    throw ParseError("invalid " + std::string(what) + ": '" + t + "'");
  }
  return v;
}

}  // namespace edgeadapt
