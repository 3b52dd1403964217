#include <iostream>

#include "earlywarn/cli.hpp"

int main(int argc, char** argv) {
    return earlywarn::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
