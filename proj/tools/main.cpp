#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return mot3d::cli::run(argc, argv, std::cout, std::cerr); }
