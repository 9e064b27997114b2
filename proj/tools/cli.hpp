#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace salengine::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Runs the salengine command line. `args` excludes the program name.
/// Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace salengine::cli
