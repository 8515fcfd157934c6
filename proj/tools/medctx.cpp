#include <iostream>

#include "medctx/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return medctx::cli::run(args, std::cout, std::cerr);
}
