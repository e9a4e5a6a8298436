#include <iostream>

#include "logicloss/harness/cli.hpp"

int main(int argc, char** argv) { return logicloss::harness::run_cli(argc, argv, std::cout, std::cerr); }
