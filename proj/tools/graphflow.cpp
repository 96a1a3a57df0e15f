#include "graphflow/cli.hpp"

int main(int argc, char** argv) { return graphflow::run_cli(argc, argv); }
