#include <iostream>

#include "dwb/cli.hpp"

int main(int argc, char** argv) {
  return dwb::cli::run(argc, argv, std::cout, std::cerr);
}
