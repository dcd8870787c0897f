#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fblab {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 2,      ///< scenario or validation failure, bad arguments
    kExitNumerical = 3,  ///< CFL, divergence, no convergence
    kExitIo = 4,
};

/// Runs the tool with `args` (without the program name). Progress goes to
/// `log` unless --quiet; errors always go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& log, std::ostream& err);

}  // namespace fblab
