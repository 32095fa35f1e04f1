#include <iostream>

#include "invmih/cli.hpp"

int main(int argc, char** argv) { return invmih::cli::run(argc, argv, std::cout, std::cerr); }
