#pragma once

// Experiment runner behind the `nfield` executable.

#include <iosfwd>

namespace nfield {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3 };

/// Parses argv and runs one subcommand. Messages go to out/err; returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nfield
