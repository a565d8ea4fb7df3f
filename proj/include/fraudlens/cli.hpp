#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fraudlens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line. args excludes the program name. Reports go to
/// `out`, diagnostics to `err`; `annotate` reads labels from `in`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

int run(int argc, char** argv);

}  // namespace fraudlens::cli
