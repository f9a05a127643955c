#include <iostream>

#include "amisr_cli/commands.hpp"

int main(int argc, char** argv) {
  return amisr::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
