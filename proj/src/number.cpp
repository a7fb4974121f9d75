#include "spherad/number.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "spherad/error.hpp"

namespace spherad {

std::string repr_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double parse_double(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || !end || *end != '\0')
    throw DataError("malformed number '" + text + "' in " + context);
  return value;
}

long parse_long(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const long value = std::strtol(begin, &end, 10);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || !end || *end != '\0')
    throw DataError("malformed integer '" + text + "' in " + context);
  return value;
}

}  // namespace spherad
