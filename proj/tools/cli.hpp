#pragma once

#include <ostream>

namespace velsurf::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumerical = 3,
};

/// Runs the command line `argv` (argv[0] is the program name). Normal output goes to `out`,
/// diagnostics to `err`; errors are one JSON object per line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace velsurf::cli
