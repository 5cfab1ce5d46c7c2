#include "maglab/cli_runner.hpp"

int main(int argc, char** argv) { return maglab::run_cli(argc, argv); }
