#pragma once

#include <ostream>

namespace ncsae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // data, shape or numeric failure
inline constexpr int kExitUsage = 2;    // bad flags or config

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ncsae::cli
