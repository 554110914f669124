#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ikrnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // bad arguments or configuration
inline constexpr int kExitIntegrity = 3;  // corrupt or inconsistent data, checkpoint mismatch
inline constexpr int kExitInternal = 1;

// Runs the command line `ikrnet <args...>` (args exclude the program name)
// and returns its exit code. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ikrnet::cli
