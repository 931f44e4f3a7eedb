#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exaq::cli {

/// Exit codes: 0 ok, 1 runtime failure (I/O, solver boundary, bad file),
/// 2 usage error (bad flags or out-of-range arguments).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand; args exclude the program name. JSON goes to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exaq::cli
