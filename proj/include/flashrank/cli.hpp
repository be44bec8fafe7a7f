#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flashrank {

/// Entry point of the `flashrank` tool. `args` excludes the program name.
/// Exit codes: 0 success, 1 validation, 2 I/O, 3 remote backend.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flashrank
