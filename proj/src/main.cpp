// SPDX-License-Identifier: Apache-2.0
#include <groundloop/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return groundloop::cli::dispatch(argc, argv, std::cout, std::cerr);
}
