#include <iostream>
#include <string>
#include <vector>

#include "n2ce/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return n2ce::run_cli(args, std::cout, std::cerr);
}
