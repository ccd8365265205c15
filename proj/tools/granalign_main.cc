// tools/granalign_main.cc

#include <iostream>
#include <string>
#include <vector>

#include "granalign/cli.h"

int main(int argc, char **argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return granalign::cli::Run(args, std::cout, std::cerr);
}
