#include <iostream>

#include "ice/cli.hpp"

int main(int argc, char** argv) { return ice::run_cli(argc, argv, std::cout, std::cerr); }
