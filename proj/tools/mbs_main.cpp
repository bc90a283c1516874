#include <iostream>

#include "mbs/cli.hpp"

int main(int argc, char** argv) { return mbs::cli_main(argc, argv, std::cout, std::cerr); }
