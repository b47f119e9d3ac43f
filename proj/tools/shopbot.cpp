#include <iostream>

#include "shopbot/cli.hpp"

int main(int argc, char** argv) { return shopbot::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
