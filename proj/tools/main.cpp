#include <iostream>

#include "passviz/cli.hpp"

int main(int argc, char** argv) { return passviz::run_cli(argc, argv, std::cout, std::cerr); }
