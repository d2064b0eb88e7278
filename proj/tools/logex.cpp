#include <iostream>
#include <string>
#include <vector>

#include "logex/cli.hpp"

int main(int argc, char** argv) {
  return logex::cli::Run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
