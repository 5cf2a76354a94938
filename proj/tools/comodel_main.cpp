#include "comodel/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return comodel::cli::dispatch(argc, argv, std::cout, std::cerr); }
