#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iupm::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,  // bad flags, unreadable or invalid input, unidentifiable model
  kNotConverged = 3,
};

// Runs one command line (args excludes the program name). "-" as an input
// path reads from in.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace iupm::cli
