#pragma once

#include <iosfwd>

namespace camtrap {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Entry point of the camtrap tool. Subcommands: synth, segment, regions,
// extract, select, train, evaluate, run. Returns 0 on success, 1 on a usage
// error (message and usage on `err`), 2 when a stage fails.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace camtrap
