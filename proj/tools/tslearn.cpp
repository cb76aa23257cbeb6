#include <iostream>

#include "tslearn/cli.hpp"

int main(int argc, char** argv) {
    return tsl::run_cli(argc, argv, std::cout, std::cerr);
}
