#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stochsym::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfig = 2,
    kNumeric = 3,
    kUnsupported = 4,
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

} // namespace stochsym::cli
