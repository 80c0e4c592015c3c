#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coreguard {

// Runs the command line `args` (without the program name). Returns the exit
// code: 0 on success, 1 on validation failures, 2 on usage errors. Errors are
// reported as one line "error: <kind>: <message>" on `err`.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace coreguard
