#pragma once

#include <string>
#include <vector>

namespace agrissl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the integration tests.
/// args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace agrissl::cli
