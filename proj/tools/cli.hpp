#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fld::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args excludes the program name). Frames for
/// `gate` come from `in` when no input file is given; "-" outputs go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// min(jobs, hardware threads, FLD_THREADS), at least 1. A malformed
/// FLD_THREADS is a usage error.
std::size_t worker_threads(std::size_t jobs);

}  // namespace fld::cli
