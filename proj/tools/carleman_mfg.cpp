#include "cmfg/cli.hpp"

int main(int argc, char** argv) { return cmfg::run_cli(argc, argv); }
