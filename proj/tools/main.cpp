#include "cli.hpp"

int main(int argc, char** argv) { return shapetest::cli::run_cli(argc, argv); }
