#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace timexl::cli {

enum ExitCode { kOk = 0, kValidation = 1, kExternal = 2 };

// Runs one command line (without the program name). Errors are reported on
// `err` and mapped to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace timexl::cli
