#pragma once

// Command-line front end: `ice <gen-opponents|collect|train|eval|report>`.

#include <iosfwd>

namespace ice {

// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ice
