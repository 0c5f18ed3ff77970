#include <iostream>

#include "reflow/cli.hpp"

int main(int argc, char** argv) {
    return reflow::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
