#include <iostream>
#include <string>
#include <vector>

#include "posl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return posl::cli::run_cli(args, std::cout, std::cerr);
}
