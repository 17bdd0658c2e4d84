#pragma once

#include <ostream>

namespace tmle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEstimation = 3;

// Runs the command line. Results go to --out when given, otherwise to `out`;
// error JSON always goes to `err` (and to --out when given).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tmle::cli
