#include <iostream>

#include "scenediff/serve/cli.hpp"

int main(int argc, char** argv) {
  return scenediff::serve::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
