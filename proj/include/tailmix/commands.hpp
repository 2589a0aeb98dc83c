#pragma once
#include <string>
#include <vector>

namespace tailmix {

// Full CLI entry point; args excludes the program name. Returns the process
// exit code: 0 success, 1 config/usage error, 2 run failure.
int run_cli(std::vector<std::string> args);

} // namespace tailmix
