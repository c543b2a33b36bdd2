#pragma once

#include <iosfwd>

namespace evaflow::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericError = 4 };

/// Parses argv, runs one subcommand, and maps failures to exit codes. Normal
/// output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evaflow::cli
