#include <iostream>
#include <string>
#include <vector>

#include "cabkgc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cabkgc::cli_run(args, std::cout, std::cerr);
}
