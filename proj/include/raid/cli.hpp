#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace raid::cli {

/// Exit codes of the command line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one of the subcommands run | bench | synth | sweep. `args` excludes
/// the program name. An input or output path of "-" means `in` / `out`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace raid::cli
