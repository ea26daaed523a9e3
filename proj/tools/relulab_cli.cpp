#include <iostream>

#include "relulab/cli.hpp"

int main(int argc, char** argv) {
    return relulab::cli_main(argc, argv, std::cout, std::cerr);
}
