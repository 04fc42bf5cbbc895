#include <iostream>

#include "bellsim/cli.hpp"

int main(int argc, char** argv) {
  return bellsim::run_cli(argc, argv, std::cout, std::cerr);
}
