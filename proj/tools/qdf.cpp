#include <iostream>

#include "qdf/cli/cli.hpp"

int main(int argc, char** argv) { return qdf::run_cli(argc, argv, std::cout, std::cerr); }
