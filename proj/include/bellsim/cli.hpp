#pragma once

#include <iosfwd>

namespace bellsim {

// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitModel = 3,
  kExitParse = 4,
  kExitEmptyCell = 5,
  kExitInternal = 1,
};

// Runs one command; argv[0] is the program name. Output directory defaults to
// $BELLSIM_OUT, else the working directory.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bellsim
