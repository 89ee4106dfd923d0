#include "sasinr/cli.hpp"

int main(int argc, char** argv) { return sasinr::cli::main(argc, argv); }
