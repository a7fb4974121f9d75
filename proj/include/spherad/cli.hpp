#pragma once

namespace spherad {

// Parses argv and executes one pipeline stage. Returns the process exit
// code: 0 success, 1 usage error, 2 data or validation error, 3 numerical
// failure. Each failure prints a single diagnostic line to stderr.
int run_command(int argc, const char* const* argv);

}  // namespace spherad
