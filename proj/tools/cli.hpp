#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shapetest::cli {

enum ExitCode : int { ok = 0, usage = 2, data = 3, numerical = 4 };

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace shapetest::cli
