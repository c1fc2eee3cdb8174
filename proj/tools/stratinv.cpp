#include <iostream>

#include "stratinv/cli.hpp"

int main(int argc, char** argv) { return stratinv::dispatch(argc, argv, std::cout, std::cerr); }
