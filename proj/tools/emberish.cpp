#include <iostream>

#include "emberish/cli.hpp"

int main(int argc, char** argv)
{
    return emberish::run_cli(argc, argv, std::cout, std::cerr);
}
