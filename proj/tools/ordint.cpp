#include "ordint/cli.hpp"

int main(int argc, char** argv) { return ordint::cli::main(argc, argv); }
