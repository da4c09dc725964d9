#include <iostream>

#include "frustumvox/cli.hpp"

int main(int argc, char** argv) { return fvx::cli::run(argc, argv, std::cout, std::cerr); }
