#include "pfrs/harness.hpp"

#include <iostream>

int main(int argc, char** argv) { return pfrs::run(argc, argv, std::cout, std::cerr); }
