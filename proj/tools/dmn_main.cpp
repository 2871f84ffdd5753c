#include <iostream>

#include "dmn/cli.hpp"

int main(int argc, char** argv) { return dmn::run_cli(argc, argv, std::cout, std::cerr); }
