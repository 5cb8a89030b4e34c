#pragma once

#include <string>
#include <vector>

namespace conformal_lab::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 success, 2 invalid input, 3 numerical failure. Errors are
/// reported as a JSON object on stderr.
int run(std::vector<std::string> args);

}  // namespace conformal_lab::cli
