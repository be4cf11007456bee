#include <iostream>

#include "kcnet/cli/commands.hpp"

int main(int argc, char** argv) { return kcnet::cli::run_command(argc, argv, std::cout, std::cerr); }
