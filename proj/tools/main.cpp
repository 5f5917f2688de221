// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "tir/cli.hpp"

int main(int argc, char** argv) {
    return tir::cli_main(argc, argv, std::cout, std::cerr);
}
