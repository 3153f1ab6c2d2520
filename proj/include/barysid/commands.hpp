#pragma once

#include <exception>
#include <iosfwd>

namespace barysid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // any other library error
inline constexpr int kExitInfeasible = 2;  // infeasible, timeout, solver budget
inline constexpr int kExitIo = 3;
inline constexpr int kExitValidation = 4;  // bad arguments, config or input data

int exit_code_for(const std::exception& e);

/// Entry point of the barysid executable. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace barysid::cli
