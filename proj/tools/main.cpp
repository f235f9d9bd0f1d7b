#include <iostream>

#include "pamtt/cli.hpp"

int main(int argc, char** argv) { return pamtt::run_cli(argc, argv, std::cout, std::cerr); }
