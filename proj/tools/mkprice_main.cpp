#include <iostream>

#include "mkprice/commands.hpp"

int main(int argc, char** argv) { return mkprice::run_cli(argc, argv, std::cout, std::cerr); }
