#pragma once

#include <iosfwd>

namespace gwx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
//! `experiment --check` with at least one failed check.
inline constexpr int kExitCheckFailed = 2;
//! `experiment --replay` whose tables differ from the manifest checksums.
inline constexpr int kExitReplayMismatch = 3;

/// Parses argv (argv[0] is the program name) and runs one subcommand.
/// Data goes to `out`, diagnostics to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace gwx::cli
