#pragma once

#include <ostream>

namespace stressprog {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

// Environment variable naming the default run directory; each command
// writes into <run dir>/<command> unless --out is given.
inline constexpr const char* kRunDirEnv = "STRESSPROG_RUN_DIR";

// Entry point of the stressprog binary. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stressprog
