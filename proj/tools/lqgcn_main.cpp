#include <iostream>

#include "lqgcn/cli.hpp"

int main(int argc, char** argv) { return lqgcn::run_cli(argc, argv, std::cout, std::cerr); }
