#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace amisr::cli {

// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kRuntime = 3 };

// Parses the arguments after the program name and runs one subcommand. Machine
// output (JSON) goes to `out`, human output to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amisr::cli
