#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regimes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCompute = 3;

/// Parses and runs one command. Text goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regimes::cli
