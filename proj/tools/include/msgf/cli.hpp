#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace msgf {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

// Entry point of the msgfusion tool. `args` excludes the program name.
// Returns 0 on success (including --help), 2 for usage errors such as an
// unknown flag or a missing input file, 1 for failures while running.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msgf
