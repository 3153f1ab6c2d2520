#include <iostream>

#include "barysid/commands.hpp"

int main(int argc, char** argv) {
  return barysid::cli::run(argc, argv, std::cout, std::cerr);
}
