#pragma once

#include <iosfwd>

namespace crat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Parses argv, runs one subcommand and maps failures onto the exit codes
/// above. Normal output goes to `out`, messages and progress to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crat::cli
