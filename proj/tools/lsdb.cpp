#include <iostream>

#include "lsdb/cli.hpp"

int main(int argc, char** argv) { return lsdb::cli::run(argc, argv, std::cout, std::cerr); }
