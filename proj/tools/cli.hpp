#pragma once

#include <string>
#include <vector>

namespace ghlfd::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Entry point of the `ghlfd` tool; args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace ghlfd::cli
