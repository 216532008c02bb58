#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace circa::cli {

enum ExitCode : int {
    kSuccess = 0,
    kRejected = 1,     ///< business outcome, e.g. every case filtered out
    kUsage = 2,
    kRuntimeFailure = 3,
};

/// Entry point of the `circa` command; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace circa::cli
