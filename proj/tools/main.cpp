#include "app.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return stratsense::cli::run(argc, argv, std::cout, std::cerr);
}
