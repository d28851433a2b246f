#include <iostream>
#include <string>
#include <vector>

#include "crexlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return crexlab::cli::run(args, std::cout, std::cerr);
}
