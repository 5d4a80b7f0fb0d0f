#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace greenmeter::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

inline constexpr const char* store_env_var = "GREENMETER_STORE";

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace greenmeter::cli
