#include <iostream>

#include "emo/cli.hpp"

int main(int argc, char** argv) { return emo::cli::main_entry(argc, argv, std::cerr, std::cerr); }
