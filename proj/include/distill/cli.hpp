// Command-line front end: train, score, eval, synth and sweep subcommands.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace distill {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// args excludes the program name. Diagnostics go to `err`, reports to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace distill
