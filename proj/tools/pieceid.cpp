#include <iostream>

#include "pieceid/cli.hpp"

int main(int argc, char** argv) {
  return pieceid::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
