#include <iostream>

#include "crat/cli/app.hpp"

int main(int argc, char** argv) { return crat::cli::run(argc, argv, std::cout, std::cerr); }
