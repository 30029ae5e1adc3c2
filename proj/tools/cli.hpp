#ifndef DWTS_TOOLS_CLI_HPP
#define DWTS_TOOLS_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace dwts::cli {

// Exit codes shared by every subcommand.
inline constexpr int exit_ok = 0;
inline constexpr int exit_runtime = 1;
inline constexpr int exit_usage = 2;

/// Runs the `dwts` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dwts::cli

#endif  // DWTS_TOOLS_CLI_HPP
