#include <iostream>

#include "irca/cli.hpp"

int main(int argc, char** argv)
{
    return irca::cli::run(argc, argv, std::cout, std::cerr);
}
