#include <iostream>

#include "storyforge/cli.hpp"

int main(int argc, char** argv) { return storyforge::cli::run_cli(argc, argv, std::cout, std::cerr); }
