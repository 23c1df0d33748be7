#include <iostream>
#include <string>
#include <vector>

#include "steinlab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return steinlab::run_cli(args, std::cout, std::cerr);
}
