#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fedcvlc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;  // bad flags, unreadable or invalid input
inline constexpr int kExitInfeasible = 3;

// Runs one subcommand. `args` excludes the program name. Data goes to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedcvlc::cli
