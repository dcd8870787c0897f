#include "fblab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fblab::run_cli(args, std::cerr, std::cerr);
}
