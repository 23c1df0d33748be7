#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace steinlab {

/// Runs the command line `args` (without the program name).
/// Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage or data errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace steinlab
