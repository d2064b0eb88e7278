#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace logex::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitNumeric = 4;

// Runs `logex <command> ...`. args excludes the program name. Reports and
// summaries go to `out`, diagnostics to `err`.
//
//   fit       events -> propensity table
//   evaluate  events + table + policies -> report rows
//   train     events (+ table) -> model file
//   act       model + context + candidates -> chosen action
//   simulate  world + policy sequence -> events file
//
// Every command that writes --out also writes <out>.manifest.json.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace logex::cli
