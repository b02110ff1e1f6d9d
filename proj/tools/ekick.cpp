#include <iostream>

#include "ekick/cli.hpp"

int main(int argc, char** argv)
{
    return ekick::cli::run(argc, argv, std::cout, std::cerr);
}
