#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace firefly {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// Subcommands gen, run, compare, exp1 and exp2. `args` excludes the
/// program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "3", "1..5" or "7,10,12" to a list of integers; throws std::invalid_argument.
std::vector<int> parse_int_list(const std::string& text);

}  // namespace firefly
