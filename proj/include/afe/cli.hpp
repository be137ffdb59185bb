#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace afe::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kConfig = 2;  // bad flags or configuration
inline constexpr int kInput = 3;   // unreadable or ill-formed input file

/// Runs `afesim <args...>` (args excludes the program name). Results go to
/// --output or `out`; errors are single lines on `err` prefixed
/// `error[usage]:`, `error[config]:`, `error[input]:` or `error[internal]:`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace afe::cli
