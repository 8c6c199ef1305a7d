#include <iostream>
#include <string>
#include <vector>

#include "firefly/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return firefly::run_cli(args, std::cout, std::cerr);
}
