#pragma once

#include <cstdint>
#include <string>

namespace spherad {

// Shortest decimal text that parses back to exactly the same double.
std::string repr_double(double x);

// FNV-1a over the bytes of `text` (stable content fingerprints).
std::uint64_t fnv1a64(const std::string& text);

// Strict full-string parse; throws DataError with `context` on failure.
double parse_double(const std::string& text, const std::string& context);
long parse_long(const std::string& text, const std::string& context);

}  // namespace spherad
