#include "cbdi/cli.hpp"

int main(int argc, char** argv) { return cbdi::run_cli(argc, argv); }
