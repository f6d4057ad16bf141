#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qbound::cli {

enum ExitCode : int {
  ok = 0,
  verification_failed = 1,
  usage_error = 2,
  numerical_error = 3,
  not_converged = 4,
};

/// Runs the qbound command line (args excludes the program name) and returns
/// the exit code. JSON/CSV goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qbound::cli
