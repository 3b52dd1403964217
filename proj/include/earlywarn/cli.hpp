#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace earlywarn {

/// Environment variable naming the default output root. Each subcommand
/// writes to `<root>/<subcommand>` unless `--output` or the config says
/// otherwise.
inline constexpr const char* kOutputRootEnv = "EARLYWARN_OUTPUT_ROOT";

/// Entry point for the `earlywarn` tool. `args[0]` is the program name.
/// Returns 0 on success, 1 on runtime failure, 2 on usage or validation
/// errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace earlywarn
