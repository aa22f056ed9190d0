#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pea::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs the pea command line; argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pea::cli
