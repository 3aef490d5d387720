#include <iostream>

#include "flim/cli.hpp"

int main(int argc, char** argv) {
  return flim::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
