#include <iostream>

#include "tct/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tct::run_cli(args, std::cout, std::cerr);
}
