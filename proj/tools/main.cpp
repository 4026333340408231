#include "dsmedian/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dsmedian::run_cli(argc, argv, std::cout, std::cerr); }
