#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flim::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, internal_error = 3 };

/// Runs `flim <command> ...`. argv[0] is the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace flim::cli
