#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sharpefolio {

inline constexpr const char* kDefaultZoom = "2020-05-01";

// Entry point for the sharpefolio command. Returns the process exit code:
// 0 success, 1 config error, 2 data error, 3 numerical failure.
int run_cli(int argc, char** argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sharpefolio
