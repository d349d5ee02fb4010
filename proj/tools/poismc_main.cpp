#include <iostream>

#include "poismc/cli.hpp"

int main(int argc, char** argv) {
    return poismc::cli::run_cli(argc, argv, std::cout, std::cerr);
}
