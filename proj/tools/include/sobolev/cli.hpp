#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sobolev::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kNumericalFailure = 2 };

/// Runs one sobolev-proxy invocation. `args` excludes the program name.
/// Normal output goes to `out`, usage and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sobolev::cli
