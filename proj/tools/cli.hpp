#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace tck::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Flat `key = value` lines; `#` starts a comment, surrounding quotes are
/// stripped. Throws ConfigError on malformed lines or repeated keys.
std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text, const std::string& origin);

/// Entry point shared by the executable and the tests. Progress and results
/// go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tck::cli
