#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace regram {

// Command-line entry point (argv without the program name).  Returns the
// process exit code: 0 success, 1 usage error, 2 data/model error.  All
// diagnostics go to `err`; results and resolved configs go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

}  // namespace regram
