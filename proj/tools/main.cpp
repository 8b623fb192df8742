#include "bffg/cli.hpp"

int main(int argc, char** argv) { return bffg::run_cli(argc, argv); }
