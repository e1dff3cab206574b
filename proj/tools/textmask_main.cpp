#include <iostream>
#include <string>
#include <vector>

#include "textmask/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return textmask::cli::run(args, std::cout, std::cerr);
}
