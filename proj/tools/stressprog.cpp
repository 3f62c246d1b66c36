#include <iostream>

#include "stressprog/cli.hpp"

int main(int argc, char** argv) { return stressprog::run_cli(argc, argv, std::cout, std::cerr); }
