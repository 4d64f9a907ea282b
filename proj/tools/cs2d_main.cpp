#include "cs2dspec/cli.hpp"

int main(int argc, char** argv) { return cs2d::run_cli(argc, argv); }
