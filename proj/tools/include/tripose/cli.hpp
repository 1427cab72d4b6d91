#pragma once

#include "tripose/errors.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace tripose::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

/// Runs one command line (without the program name). Diagnostics go to
/// `err`, summaries to `out`. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit code for a library error code.
int exit_code_for(ErrorCode code);

}  // namespace tripose::cli
