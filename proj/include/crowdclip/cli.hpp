#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace crowdclip {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the `crowdclip` executable.  args excludes argv[0].
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace crowdclip
