#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctcfuse {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

// Entry point behind the `ctcfuse` binary. `args` excludes the program name.
// Subcommands: normalize, train-lm, decode, evaluate, tune, stats.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace ctcfuse
