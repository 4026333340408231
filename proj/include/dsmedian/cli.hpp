#pragma once

#include <iosfwd>

namespace dsmedian {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitInput = 2,
    kExitInfeasible = 3,
    kExitOracle = 4,
};

/// Entry point of the `dsmedian` tool: subcommands analyze, estimate,
/// simulate, allocate and compare. JSON goes to `out` unless --output names
/// a file; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsmedian
