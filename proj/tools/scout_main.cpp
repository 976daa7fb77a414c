#include <iostream>
#include <string>
#include <vector>

#include "scout/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return scout::run_command(args, std::cout, std::cerr);
}
