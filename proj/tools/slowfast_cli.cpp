#include "slowfast/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return slowfast::cli::run(argc, argv, std::cout, std::cerr);
}
