#pragma once

#include <iosfwd>

namespace spml::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfig = 2,
    kIntegration = 3,
    kParse = 4,
    kGeneration = 5,
    kNonConvergence = 6,
    kDomain = 7,
};

/// Runs the tool with the given arguments (argv[0] is the program name).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spml::cli
