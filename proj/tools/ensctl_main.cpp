#include <iostream>

#include "ensctl/cli.hpp"

int main(int argc, char** argv) { return ensctl::cli::main_entry(argc, argv, std::cout, std::cerr); }
