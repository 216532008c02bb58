#include "circa/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return circa::cli::run(argc, argv, std::cout, std::cerr); }
