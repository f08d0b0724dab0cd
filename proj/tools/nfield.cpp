#include <iostream>

#include "nfield/cli.hpp"

int main(int argc, char** argv) { return nfield::run_cli(argc, argv, std::cout, std::cerr); }
