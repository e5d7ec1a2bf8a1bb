#pragma once

namespace stormvi::cli {

// Full command-line entry point; returns the process exit code
// (0 ok, 1 usage, 2 data error, 3 numeric failure).
int run(int argc, const char* const* argv);

}  // namespace stormvi::cli
