#pragma once

// `gazelab` command-line entry point: metrics, report, anova, simulate, power.

#include <iosfwd>
#include <string>
#include <vector>

namespace gazelab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// `args` excludes the program name. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gazelab::cli
