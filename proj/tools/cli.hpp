#pragma once

// The adafuse command-line tool as a library, so tests can drive it
// in-process. Exit codes: 0 success, 1 usage or configuration error,
// 2 runtime or provider error.

#include <ostream>
#include <string>
#include <vector>

namespace adafuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adafuse::cli
