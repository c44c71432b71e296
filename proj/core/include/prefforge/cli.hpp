#ifndef PREFFORGE_CLI_HPP_
#define PREFFORGE_CLI_HPP_

#include <string>
#include <vector>

namespace prefforge {

/// Entry point behind the `prefforge` binary. Subcommands: toy, pipeline,
/// gcpo, grpo, eval, metrics. Returns a process exit code; never throws
/// (errors are printed to stderr and map to exit code 1, usage problems to
/// 2).
int run_command(int argc, const char* const* argv);

/// Convenience overload for in-process driving; argv[0] is implied.
int run_command(const std::vector<std::string>& args);

}  // namespace prefforge

#endif  // PREFFORGE_CLI_HPP_
