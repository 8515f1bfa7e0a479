#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actree::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one `actree` command line (without the program name). Subcommands:
/// generate, train, eval, parse and stats. `--config FILE` supplies defaults
/// that flags override.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace actree::cli
