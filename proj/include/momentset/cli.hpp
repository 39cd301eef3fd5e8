#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace momentset {

inline constexpr const char* kVersion = "0.1.0";

/// Command-line entry point. args[0] is the program name. Returns 0 on
/// success, 2 on a usage or configuration error, 1 on a runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace momentset
