#include <iostream>

#include "cgas/cli.hpp"

int main(int argc, char** argv) { return cgas::cli_main(argc, argv, std::cout, std::cerr); }
