#include <iostream>

#include "medfab/cli.hpp"

int main(int argc, char** argv) { return medfab::cli::run(argc, argv, std::cout, std::cerr); }
