#include <iostream>

#include "timgen/cli.hpp"

int main(int argc, char** argv) { return timgen::run_cli(argc, argv, std::cout, std::cerr); }
