#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ptkit::cli {

inline constexpr const char *kToolVersion = "0.3.0";

// Runs one command line (without the program name). Returns 0 on success,
// 1 on a validation error, 2 on a runtime failure. A run manifest is
// written for every run that gets past argument parsing.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace ptkit::cli
