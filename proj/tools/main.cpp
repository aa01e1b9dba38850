#include "semap/cli.hpp"

int main(int argc, char** argv) { return semap::run_cli(argc, argv); }
