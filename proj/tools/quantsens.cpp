#include <iostream>

#include "quantsens/cli.hpp"

int main(int argc, char** argv) { return qs::run_cli(argc, argv, std::cout, std::cerr); }
