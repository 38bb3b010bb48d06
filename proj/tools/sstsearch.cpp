#include <iostream>

#include "sstsearch/cli.hpp"

int main(int argc, char** argv) { return sstsearch::cli_main(argc, argv, std::cout, std::cerr); }
