#pragma once

#include <iosfwd>

namespace logicloss::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Subcommands: compile, gen-data, train, eval, grad-check, bench-encoders.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace logicloss::harness
