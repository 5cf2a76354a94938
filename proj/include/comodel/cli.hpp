#pragma once

#include <iosfwd>

namespace comodel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

/// Entry point for the `comodel` tool: run, serve, metrics, render, replay, export.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace comodel::cli
