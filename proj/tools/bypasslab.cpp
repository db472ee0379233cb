#include <iostream>
#include <string>
#include <vector>

#include "bypass/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bypass::cli::run_cli(args, std::cout, std::cerr);
}
