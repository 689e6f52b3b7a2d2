#pragma once

#include <iosfwd>

namespace timgen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Subcommands: gen-data, train, eval, gradcheck, generate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace timgen
