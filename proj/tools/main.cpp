#include <iostream>

#include "ybspin/cli.hpp"

int main(int argc, char** argv) {
  return ybspin::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
