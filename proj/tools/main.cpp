#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return epigen::app::run_cli(argc, argv, std::cout, std::cerr); }
