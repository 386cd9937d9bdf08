#include <iostream>

#include "mmsold/cli.hpp"

int main(int argc, char** argv) { return mmsold::run_cli(argc, argv, std::cout, std::cerr); }
