#include <iostream>

#include "gazespiral/commands.hpp"

int main(int argc, char** argv) { return gazespiral::cli::run(argc, argv, std::cout, std::cerr); }
