#include "yieldest/cli.hpp"

int main(int argc, char** argv) { return yieldest::cli_run(argc, argv); }
