#include <iostream>
#include <string>
#include <vector>

#include "modalid/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return modalid::run_cli(args, std::cout, std::cerr);
}
