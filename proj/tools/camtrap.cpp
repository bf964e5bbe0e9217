#include <iostream>

#include "camtrap/cli.hpp"

int main(int argc, char** argv) { return camtrap::cli_dispatch(argc, argv, std::cout, std::cerr); }
