#include <iostream>

#include "lab/commands.hpp"

int main(int argc, char** argv) { return chua::lab::run_cli(argc, argv, std::cout, std::cerr); }
