#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmatch {

/// Runs the command line (without the program name). Returns the process
/// exit code: 0 success, 1 runtime failure, 2 usage/config/input error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pmatch
