#include "discover/cli.hpp"

int main(int argc, char** argv) { return discover::cli_main(argc, argv); }
