#pragma once

#include <iosfwd>

namespace slowfast::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 2,
  kSolverError = 3,
  kBadArguments = 4,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slowfast::cli
