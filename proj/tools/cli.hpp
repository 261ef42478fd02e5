#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cir::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPipeline = 3;
inline constexpr int kExitInternal = 4;

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cir::cli
