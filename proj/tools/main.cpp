#include <iostream>
#include <string>
#include <vector>

#include "crowdclip/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return crowdclip::RunCli(args, std::cout, std::cerr);
}
