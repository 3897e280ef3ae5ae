#include <iostream>

#include "uam/cli.hpp"

int main(int argc, char** argv) { return uam::cli::dispatch(argc, argv, std::cout, std::cerr); }
