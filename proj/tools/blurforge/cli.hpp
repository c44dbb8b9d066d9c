#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blurforge::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitConfig = 3;

/// Runs the command line `args` (args[0] is the program name). Reports go to
/// files under --out; the summary line goes to `out`, logs to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from BLURFORGE_THREADS, at least 1.
int worker_count();

}  // namespace blurforge::cli
