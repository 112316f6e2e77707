#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace slq {

/// Exit statuses of the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNegativeVerdict = 1;
inline constexpr int kExitInputError = 2;

/// Runs one subcommand; `args` excludes the program name. Reports go to the
/// --out file when given, otherwise to `out`; diagnostics go to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slq
