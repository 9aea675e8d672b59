#include <iostream>

#include "rldsm/app.hpp"

int main(int argc, char** argv) { return rldsm::app::run(argc, argv, std::cout, std::cerr); }
