#pragma once

#include <iosfwd>

namespace tsl {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitCompatibility = 3 };

// Entry point of the `tslearn` tool with subcommands train-teacher,
// train-student, eval, gen-data and inspect.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tsl
